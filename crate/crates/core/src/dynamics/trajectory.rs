use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{IntegrationStats, SpinState, TimeUnit};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CSV_HEADER: [&str; 5] = ["t", "gamma", "v_gamma", "eta", "v_eta"];

/// Samples of one integration run, strictly increasing in time.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    samples: Vec<SpinState<T>>,
    stats: IntegrationStats,
    time_unit: TimeUnit,
}

#[derive(Serialize)]
struct Summary<'a> {
    samples: usize,
    t_start: f64,
    t_end: f64,
    time_unit: TimeUnit,
    #[serde(flatten)]
    stats: &'a IntegrationStats,
}

impl<T: Scalar> Trajectory<T> {
    pub(crate) fn new(samples: Vec<SpinState<T>>, stats: IntegrationStats, time_unit: TimeUnit) -> Self {
        debug_assert!(!samples.is_empty());
        Self {
            samples,
            stats,
            time_unit,
        }
    }

    /// Wraps externally produced samples, checking the time ordering.
    pub fn from_samples(samples: Vec<SpinState<T>>, time_unit: TimeUnit) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::param("samples", "a trajectory needs at least one sample"));
        }
        if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::param("samples", "times must increase strictly"));
        }
        Ok(Self::new(samples, IntegrationStats::default(), time_unit))
    }

    pub fn samples(&self) -> &[SpinState<T>] {
        &self.samples
    }

    pub fn stats(&self) -> &IntegrationStats {
        &self.stats
    }

    pub fn time_unit(&self) -> TimeUnit {
        self.time_unit
    }

    pub fn first(&self) -> &SpinState<T> {
        &self.samples[0]
    }

    pub fn last(&self) -> &SpinState<T> {
        self.samples.last().unwrap()
    }

    pub fn span(&self) -> T {
        self.last().t - self.first().t
    }

    /// Applies `f` to every sample, e.g. a change of frame.
    pub fn map(&self, f: impl Fn(&SpinState<T>) -> SpinState<T>) -> Self {
        Self {
            samples: self.samples.iter().map(f).collect(),
            stats: self.stats,
            time_unit: self.time_unit,
        }
    }

    /// Samples with `t0 <= t <= t1`.
    pub fn between(&self, t0: T, t1: T) -> &[SpinState<T>] {
        let lo = self.samples.partition_point(|s| s.t < t0);
        let hi = self.samples.partition_point(|s| s.t <= t1);
        &self.samples[lo..hi.max(lo)]
    }

    /// Writes every `stride`-th sample, always ending with the final one.
    pub fn write_csv<W: Write>(&self, writer: W, stride: usize) -> Result<()> {
        if stride == 0 {
            return Err(Error::param("stride", "must be at least 1"));
        }
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(CSV_HEADER)?;
        let last = self.samples.len() - 1;
        for (i, s) in self.samples.iter().enumerate() {
            if i % stride == 0 || i == last {
                out.write_record([s.t, s.gamma, s.v_gamma, s.eta, s.v_eta].map(|v| v.to_string()))?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, stride: usize) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?, stride)
    }

    /// Integrator statistics plus the time span, as a JSON object.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::to_value(Summary {
            samples: self.samples.len(),
            t_start: self.first().t.as_f64(),
            t_end: self.last().t.as_f64(),
            time_unit: self.time_unit,
            stats: &self.stats,
        })
        .expect("summary serializes")
    }
}
