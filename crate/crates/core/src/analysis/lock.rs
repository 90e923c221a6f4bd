use serde::Serialize;

use crate::dynamics::{SpinState, Trajectory};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Shell {
    Crust,
    Core,
}

impl Shell {
    fn angle<T: Copy>(self, s: &SpinState<T>) -> T {
        match self {
            Shell::Crust => s.gamma,
            Shell::Core => s.eta,
        }
    }

    fn rate<T: Copy>(self, s: &SpinState<T>) -> T {
        match self {
            Shell::Crust => s.v_gamma,
            Shell::Core => s.v_eta,
        }
    }
}

/// Thresholds of [`detect_lock_with`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LockCriteria {
    /// Locked needs the last window's mean rate below this fraction of the
    /// largest rate seen in the first window.
    pub rate_fraction: f64,
    /// Locked needs the angle to stay within this span over the last window.
    pub max_span: f64,
    /// Two consecutive window means within this relative distance count as a
    /// steady mean rate.
    pub steady_fraction: f64,
}

impl Default for LockCriteria {
    fn default() -> Self {
        Self {
            rate_fraction: 0.01,
            max_span: std::f64::consts::PI,
            steady_fraction: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum LockVerdict<T> {
    Locked,
    /// Oscillating about a steady mean rate.
    LibratingAbout { rate: T },
    Circulating,
}

impl<T> LockVerdict<T> {
    pub fn is_locked(&self) -> bool {
        matches!(self, LockVerdict::Locked)
    }
}

struct WindowStats {
    mean_rate: f64,
    span: f64,
    max_rate: f64,
    monotone: bool,
}

fn window_stats<T: Scalar>(samples: &[SpinState<T>], shell: Shell) -> Result<WindowStats> {
    if samples.len() < 2 {
        return Err(Error::param("window", "fewer than two samples fall inside a window"));
    }
    let angles: Vec<f64> = samples.iter().map(|s| shell.angle(s).as_f64()).collect();
    let first = samples[0].t.as_f64();
    let last = samples[samples.len() - 1].t.as_f64();
    let (lo, hi) = angles
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| (lo.min(a), hi.max(a)));
    let increasing = angles.windows(2).all(|w| w[1] >= w[0]);
    let decreasing = angles.windows(2).all(|w| w[1] <= w[0]);
    Ok(WindowStats {
        mean_rate: (angles[angles.len() - 1] - angles[0]) / (last - first),
        span: hi - lo,
        max_rate: samples
            .iter()
            .map(|s| shell.rate(s).as_f64().abs())
            .fold(0.0, f64::max),
        monotone: increasing || decreasing,
    })
}

/// Classifies the end of a trajectory with the default criteria.
pub fn detect_lock<T: Scalar>(traj: &Trajectory<T>, shell: Shell, window: T) -> Result<LockVerdict<T>> {
    detect_lock_with(traj, shell, window, &LockCriteria::default())
}

/// Classifies the last `window` of a trajectory.
///
/// Locked: small mean rate and a bounded angle. Otherwise a mean rate that
/// is the same over the last two windows is reported as libration about it;
/// a monotone angle sweeping more than a full turn with an unsteady mean is
/// circulating.
pub fn detect_lock_with<T: Scalar>(
    traj: &Trajectory<T>,
    shell: Shell,
    window: T,
    criteria: &LockCriteria,
) -> Result<LockVerdict<T>> {
    if !(window > T::zero()) {
        return Err(Error::param("window", "must be positive"));
    }
    let needed = window * T::lit(3.0);
    if traj.span() < needed * (T::one() - T::lit(1e-12)) {
        return Err(Error::TrajectoryTooShort {
            span: traj.span().as_f64(),
            needed: needed.as_f64(),
        });
    }
    let t0 = traj.first().t;
    let t_end = traj.last().t;
    let opening = window_stats(traj.between(t0, t0 + window), shell)?;
    let last = window_stats(traj.between(t_end - window, t_end), shell)?;
    let previous = window_stats(traj.between(t_end - window - window, t_end - window), shell)?;

    let reference = opening.max_rate;
    if last.mean_rate.abs() <= criteria.rate_fraction * reference && last.span < criteria.max_span {
        return Ok(LockVerdict::Locked);
    }
    let scale = last.mean_rate.abs().max(previous.mean_rate.abs());
    if (last.mean_rate - previous.mean_rate).abs() <= criteria.steady_fraction * scale {
        return Ok(LockVerdict::LibratingAbout {
            rate: T::lit(last.mean_rate),
        });
    }
    if last.monotone && last.span > 2.0 * std::f64::consts::PI {
        return Ok(LockVerdict::Circulating);
    }
    Ok(LockVerdict::LibratingAbout {
        rate: T::lit(last.mean_rate),
    })
}
