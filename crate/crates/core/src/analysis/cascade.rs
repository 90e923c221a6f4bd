//! Event-driven descent through the resonances `k, k−1, ..., 0`.
//!
//! Between resonances crust and core spin down together under the tidal
//! drag alone, `ν̈ = −(λ′/C)·ν̇`, where `ν̇ = Ω − ω`. Resonance `k` sits at
//! `ν̇ = kω/2` and is entered at the top of its crust window. While locked
//! the eccentricity may decay as `ė = −e/τ′_η`; the lock ends when `e` drops
//! below the core threshold.

use std::io::Write;

use serde::Serialize;

use super::{capture_certainty, core_condition_at, crust_condition};
use crate::bodies::{moments_of_inertia, viscoelastic_lambda, BodyParameters};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CASCADE_CSV_HEADER: [&str; 6] = ["k", "t_enter", "t_exit", "e_enter", "e_exit", "exit_cause"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EccentricityLaw {
    /// `e` stays at its initial value.
    Frozen,
    /// `e(t) = e·exp(−t/τ′_η)` while locked. A modelling choice: only the
    /// timescale is known, not the law.
    #[default]
    ExponentialDecay,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitCause {
    EccentricityBelowThreshold,
    #[serde(rename = "terminal_1to1")]
    Terminal1to1,
    /// Capture not guaranteed; the spin crossed the window without locking.
    NotCaptured,
    /// Still locked when the time horizon ran out.
    HorizonReached,
}

impl ExitCause {
    pub fn as_str(self) -> &'static str {
        match self {
            ExitCause::EccentricityBelowThreshold => "eccentricity_below_threshold",
            ExitCause::Terminal1to1 => "terminal_1to1",
            ExitCause::NotCaptured => "not_captured",
            ExitCause::HorizonReached => "horizon_reached",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CascadeEpisode<T> {
    pub k: u32,
    /// Seconds since the start of the run.
    pub t_enter: T,
    /// Infinite for a terminal state without a horizon.
    pub t_exit: T,
    pub e_enter: T,
    pub e_exit: T,
    pub exit_cause: ExitCause,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CascadeOptions<T> {
    pub law: EccentricityLaw,
    /// Time horizon in seconds; `None` runs to the 1:1 state.
    pub t_max: Option<T>,
}

impl<T> Default for CascadeOptions<T> {
    fn default() -> Self {
        Self {
            law: EccentricityLaw::default(),
            t_max: None,
        }
    }
}

/// Runs the cascade from resonance `k_start` with initial eccentricity `e0`
/// and spin `spin0 = Ω/ω` (at least 1).
pub fn cascade<T: Scalar>(
    params: &BodyParameters<T>,
    k_start: u32,
    e0: T,
    spin0: T,
    options: &CascadeOptions<T>,
) -> Result<Vec<CascadeEpisode<T>>> {
    params.validate()?;
    if k_start == 0 {
        return Err(Error::param("k_start", "must be at least 1"));
    }
    if !(spin0 >= T::one()) || !spin0.is_finite() {
        return Err(Error::param("spin0", "spin rate in units of ω must be finite and >= 1"));
    }
    let horizon = options.t_max.unwrap_or_else(T::infinity);
    if !(horizon > T::zero()) {
        return Err(Error::param("t_max", "must be positive"));
    }
    let mut body = params.clone();
    body.e = e0;
    body.validate()?;

    let (c, _) = moments_of_inertia(params);
    let w = params.omega;
    let half = T::lit(0.5);
    let mut t = T::zero();
    let mut e = e0;
    let mut nu = (spin0 - T::one()) * w;
    let mut episodes = Vec::new();

    for k in (1..=k_start).rev() {
        let rate = viscoelastic_lambda(params, k)? / c;
        let centre = T::from_u32(k).unwrap() * w * half;
        body.e = e;
        let width = crust_condition(&body, k, T::zero())?.threshold;
        let top = centre + width;
        let bottom = centre - width;
        if nu > top {
            t += (nu / top).ln() / rate;
            nu = top;
        }
        if nu < bottom {
            continue;
        }
        if t >= horizon {
            return Ok(episodes);
        }
        let core = match core_condition_at(params, k, e) {
            Ok(cond) if cond.satisfied => cond,
            Ok(_) | Err(Error::Unsatisfiable { .. }) => continue,
            Err(other) => return Err(other),
        };
        if !capture_certainty(&body, k)?.certain {
            // Cross the window (or, if it reaches down to zero, half the
            // resonant rate) without locking.
            let exit_rate = bottom.max(centre * half);
            let t_exit = t + (nu / exit_rate).ln().max(T::epsilon()) / rate;
            episodes.push(CascadeEpisode {
                k,
                t_enter: t,
                t_exit: t_exit.min(horizon),
                e_enter: e,
                e_exit: e,
                exit_cause: ExitCause::NotCaptured,
            });
            if t_exit >= horizon {
                return Ok(episodes);
            }
            t = t_exit;
            nu = exit_rate;
            continue;
        }

        nu = centre;
        let locked_for = match options.law {
            EccentricityLaw::Frozen => T::infinity(),
            EccentricityLaw::ExponentialDecay => (e / core.e_min).ln() / rate,
        };
        if t + locked_for >= horizon {
            let e_exit = match options.law {
                EccentricityLaw::Frozen => e,
                EccentricityLaw::ExponentialDecay if horizon.is_finite() => e * (-(horizon - t) * rate).exp(),
                EccentricityLaw::ExponentialDecay => core.e_min,
            };
            episodes.push(CascadeEpisode {
                k,
                t_enter: t,
                t_exit: horizon,
                e_enter: e,
                e_exit,
                exit_cause: ExitCause::HorizonReached,
            });
            return Ok(episodes);
        }
        episodes.push(CascadeEpisode {
            k,
            t_enter: t,
            t_exit: t + locked_for,
            e_enter: e,
            e_exit: core.e_min,
            exit_cause: ExitCause::EccentricityBelowThreshold,
        });
        t += locked_for;
        e = core.e_min;
    }

    // Final approach to synchronous rotation, still under the k = 1 drag.
    let rate = viscoelastic_lambda(params, 1)? / c;
    body.e = e;
    let width = crust_condition(&body, 0, T::zero())?.threshold;
    if nu > width {
        t += (nu / width).ln() / rate;
    }
    if t < horizon {
        episodes.push(CascadeEpisode {
            k: 0,
            t_enter: t,
            t_exit: horizon,
            e_enter: e,
            e_exit: e,
            exit_cause: ExitCause::Terminal1to1,
        });
    }
    Ok(episodes)
}

/// Shortest round-trip form in exponent notation; the times run to 10³⁰ s.
fn sci<T: Scalar>(v: T) -> String {
    format!("{:e}", v.as_f64())
}

/// Writes the episodes as CSV (`k,t_enter,t_exit,e_enter,e_exit,exit_cause`).
pub fn write_cascade_csv<T: Scalar, W: Write>(episodes: &[CascadeEpisode<T>], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(CASCADE_CSV_HEADER)?;
    for ep in episodes {
        out.write_record([
            ep.k.to_string(),
            sci(ep.t_enter),
            sci(ep.t_exit),
            sci(ep.e_enter),
            sci(ep.e_exit),
            ep.exit_cause.as_str().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
