//! Equilibrium conditions, the core's Lyapunov energy, the capture-certainty
//! criterion, lock detection and the resonance cascade.
//!
//! Two conventions meet here. The dynamics use torque amplitudes
//! `A = ½εω²·a_k eᵏ`; the closed-form literature criteria carry slightly
//! different constants. Both are reported; the dynamics' own convention
//! decides anything that is compared against a trajectory.

mod cascade;
mod lock;

use serde::Serialize;

use crate::bodies::{moments_of_inertia, viscoelastic_lambda, viscous_lambda, BodyParameters};
use crate::dynamics::{decoupled_core_field, ModelCoefficients, SpinState, TimeUnit};
use crate::error::{Error, Result};
use crate::kepler::{fourier_a_limit0, harmonic_strength};
use crate::scalar::Scalar;

pub use cascade::{cascade, write_cascade_csv, CascadeEpisode, CascadeOptions, EccentricityLaw, ExitCause, CASCADE_CSV_HEADER};
pub use lock::{detect_lock, detect_lock_with, LockCriteria, LockVerdict, Shell};

/// Upper end of the eccentricity search; the quadrature is not trusted beyond.
pub const MAX_SEARCH_ECCENTRICITY: f64 = 0.9;

/// Whether the crust can sit still against a core spinning at `v_eta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrustCondition<T> {
    pub k: u32,
    pub v_eta: T,
    /// `3(B′−A′)ω²·a_k eᵏ / (4λ)`, i.e. `A_crust·τ_γ`.
    pub threshold: T,
    pub exists: bool,
    /// `½·arcsin(v_eta/threshold)`, present when the equilibrium exists.
    pub gamma_bar: Option<T>,
}

/// Crust condition straight from a coefficient set, in its time unit.
pub fn crust_condition_for<T: Scalar>(coeffs: &ModelCoefficients<T>, v_eta: T) -> CrustCondition<T> {
    let threshold = if coeffs.inv_tau_gamma > T::zero() {
        coeffs.a_crust / coeffs.inv_tau_gamma
    } else {
        T::infinity()
    };
    let exists = v_eta.abs() <= threshold;
    let gamma_bar = if !exists {
        None
    } else if threshold.is_infinite() {
        Some(T::zero())
    } else {
        Some(half_arcsin(v_eta / threshold))
    };
    CrustCondition {
        k: coeffs.k,
        v_eta,
        threshold,
        exists,
        gamma_bar,
    }
}

/// Crust condition for a body at resonance `k` (SI, `v_eta` in rad/s).
/// Only the viscous coupling enters, so `k = 0` is allowed.
pub fn crust_condition<T: Scalar>(params: &BodyParameters<T>, k: u32, v_eta: T) -> Result<CrustCondition<T>> {
    params.validate()?;
    let (_, c_prime) = moments_of_inertia(params);
    let strength = harmonic_strength(k as usize, params.e)?;
    let w = params.omega;
    let a_crust = T::lit(0.5) * params.epsilon_crust() * w * w * strength;
    let coeffs = ModelCoefficients {
        a_crust,
        a_core: T::zero(),
        inv_tau_gamma: viscous_lambda(params)? / c_prime,
        inv_tau_eta: T::zero(),
        inv_tau_eta_prime: T::zero(),
        drift: T::from_u32(k).unwrap() * w / T::lit(2.0),
        k,
        time_unit: TimeUnit::Seconds,
    };
    Ok(crust_condition_for(&coeffs, v_eta))
}

fn half_arcsin<T: Scalar>(x: T) -> T {
    T::lit(0.5) * x.max(-T::one()).min(T::one()).asin()
}

/// Smallest `e` with `a_k(e)·eᵏ ≥ target`, by bisection.
pub fn minimum_eccentricity<T: Scalar>(k: u32, target: T) -> Result<T> {
    if k == 0 {
        return Err(Error::Domain("the eccentricity threshold needs k >= 1".into()));
    }
    if !(target > T::zero()) {
        return Ok(T::zero());
    }
    let strength = |e: T| harmonic_strength(k as usize, e);
    let e_cap = T::lit(MAX_SEARCH_ECCENTRICITY);
    if strength(e_cap)? < target {
        return Err(Error::Unsatisfiable { k });
    }
    let kf = T::from_u32(k).unwrap();
    let guess = (target / fourier_a_limit0::<T>(k as usize)?).powf(kf.recip());
    let two = T::lit(2.0);
    let mut lo = (guess / two).min(e_cap / two);
    while strength(lo)? >= target {
        lo /= two;
    }
    let mut hi = (guess * two).min(e_cap);
    while strength(hi)? < target {
        hi = (hi * two).min(e_cap);
    }
    while hi - lo > T::lit(4.0) * T::epsilon() * hi {
        let mid = lo + (hi - lo) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if strength(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Existence of the core's resonant equilibrium under a locked crust.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoreCondition<T> {
    pub k: u32,
    pub e: T,
    /// Threshold from the implemented field: `a_k eᵏ = kλ′/(εCω)`.
    pub e_min: T,
    /// Threshold in the closed literature form `a_k eᵏ = 2kλ′/(3εCω)`.
    pub e_min_literal: Option<T>,
    pub satisfied: bool,
    /// Fixed point `½·arcsin(−(λ′/C)(kω/2)/A_core)` of the implemented field.
    pub eta_bar: Option<T>,
    /// Closed literature expression `½·arcsin((kλ′/C)/(3εω·a_k eᵏ))`, echoed only.
    pub eta_bar_literal: Option<T>,
}

/// Core condition at the body's own eccentricity.
///
/// `k = 0` is vacuous: no drift term, so the equilibrium `η = 0` always exists.
pub fn core_condition<T: Scalar>(params: &BodyParameters<T>, k: u32) -> Result<CoreCondition<T>> {
    core_condition_at(params, k, params.e)
}

/// Core condition for the body's parameters at eccentricity `e`.
pub fn core_condition_at<T: Scalar>(params: &BodyParameters<T>, k: u32, e: T) -> Result<CoreCondition<T>> {
    params.validate()?;
    if k == 0 {
        return Ok(CoreCondition {
            k,
            e,
            e_min: T::zero(),
            e_min_literal: Some(T::zero()),
            satisfied: true,
            eta_bar: Some(T::zero()),
            eta_bar_literal: Some(T::zero()),
        });
    }
    let (c, _) = moments_of_inertia(params);
    let lambda_prime = viscoelastic_lambda(params, k)?;
    let kf = T::from_u32(k).unwrap();
    let target = kf * lambda_prime / (params.epsilon * c * params.omega);
    let e_min = minimum_eccentricity(k, target)?;
    let e_min_literal = minimum_eccentricity(k, T::lit(2.0 / 3.0) * target).ok();
    let strength = harmonic_strength(k as usize, e)?;
    let ratio = if strength > T::zero() {
        target / strength
    } else {
        T::infinity()
    };
    let satisfied = e > e_min;
    let eta_bar = (ratio <= T::one()).then(|| half_arcsin(-ratio));
    let literal = ratio / T::lit(3.0);
    let eta_bar_literal = (literal <= T::one()).then(|| half_arcsin(literal));
    Ok(CoreCondition {
        k,
        e,
        e_min,
        e_min_literal,
        satisfied,
        eta_bar,
        eta_bar_literal,
    })
}

/// Tilted-washboard potential `−(A_core/2)·cos 2η + (λ′/C)(kω/2)·η`.
pub fn effective_potential<T: Scalar>(eta: T, coeffs: &ModelCoefficients<T>) -> T {
    -T::lit(0.5) * coeffs.a_core * (T::lit(2.0) * eta).cos() + tilt(coeffs) * eta
}

fn tilt<T: Scalar>(coeffs: &ModelCoefficients<T>) -> T {
    coeffs.inv_tau_eta_prime * coeffs.drift
}

/// `W = ½vη² + V_eff(η)` of the crust-locked core.
pub fn lyapunov_energy<T: Scalar>(state: &SpinState<T>, coeffs: &ModelCoefficients<T>) -> T {
    T::lit(0.5) * state.v_eta * state.v_eta + effective_potential(state.eta, coeffs)
}

/// Closed form of `dW/dt`: `−((λ + λ′)/C)·vη²`.
pub fn lyapunov_rate<T: Scalar>(state: &SpinState<T>, coeffs: &ModelCoefficients<T>) -> T {
    -(coeffs.inv_tau_eta + coeffs.inv_tau_eta_prime) * state.v_eta * state.v_eta
}

/// `∇W·f` evaluated term by term against the decoupled core field.
pub fn lyapunov_gradient_rate<T: Scalar>(state: &SpinState<T>, coeffs: &ModelCoefficients<T>) -> T {
    let (eta_dot, v_dot) = decoupled_core_field(state, coeffs);
    let d_eta = coeffs.a_core * (T::lit(2.0) * state.eta).sin() + tilt(coeffs);
    d_eta * eta_dot + state.v_eta * v_dot
}

/// Outcome of the capture analysis at one resonance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CaptureVerdict<T> {
    pub k: u32,
    pub e: T,
    /// Core rate the crust condition was evaluated at (rad/s).
    pub v_eta: T,
    pub crust_threshold: T,
    pub crust_equilibrium_exists: bool,
    pub gamma_bar: Option<T>,
    pub core_equilibrium_exists: bool,
    pub eta_bar: Option<T>,
    pub eta_bar_literal: Option<T>,
    pub e_min: Option<T>,
    pub e_min_literal: Option<T>,
    /// `λ/λ′`
    pub lambda_ratio: T,
    /// `kπ/√(32ε·a_k eᵏ) − 1`
    pub certainty_threshold: T,
    /// `λ/λ′ − certainty_threshold`
    pub certainty_margin: T,
    /// The same bound redone with the implemented amplitudes:
    /// `kπ/√(16ε·a_k eᵏ) − 1`.
    pub certainty_threshold_model: T,
    /// `|ΔV_eff| = π(λ′/C)(kω/2)` (rad²/s²).
    pub delta_v_eff: T,
    /// Lower bound on `|ΔE_eff|` across one well, implemented amplitudes:
    /// `((λ + λ′)/C)·√(8·A_core)`.
    pub delta_e_bound: T,
    /// The literature form `((λ + λ′)/C)·ω·√(8ε·a_k eᵏ)`.
    pub delta_e_bound_literal: T,
    /// Core equilibrium exists and the margin is positive.
    pub certain: bool,
}

/// Capture analysis with the crust condition taken at `v_eta` (rad/s).
pub fn capture_verdict<T: Scalar>(params: &BodyParameters<T>, k: u32, v_eta: T) -> Result<CaptureVerdict<T>> {
    if k == 0 {
        return Err(Error::Domain("capture certainty needs k >= 1".into()));
    }
    if !(params.e > T::zero()) {
        return Err(Error::Domain("capture certainty needs e > 0".into()));
    }
    let coeffs = ModelCoefficients::from_body(params, k, TimeUnit::Seconds)?;
    let crust = crust_condition_for(&coeffs, v_eta);
    let core = match core_condition(params, k) {
        Ok(c) => Some(c),
        Err(Error::Unsatisfiable { .. }) => None,
        Err(other) => return Err(other),
    };
    let strength = harmonic_strength(k as usize, params.e)?;
    let kf = T::from_u32(k).unwrap();
    let pi = T::PI();
    let lambda_ratio = coeffs.inv_tau_eta / coeffs.inv_tau_eta_prime;
    let es = params.epsilon * strength;
    let certainty_threshold = kf * pi / (T::lit(32.0) * es).sqrt() - T::one();
    let certainty_threshold_model = kf * pi / (T::lit(16.0) * es).sqrt() - T::one();
    let beta = coeffs.inv_tau_eta + coeffs.inv_tau_eta_prime;
    let certainty_margin = lambda_ratio - certainty_threshold;
    let core_equilibrium_exists = core.is_some_and(|c| c.satisfied);
    Ok(CaptureVerdict {
        k,
        e: params.e,
        v_eta,
        crust_threshold: crust.threshold,
        crust_equilibrium_exists: crust.exists,
        gamma_bar: crust.gamma_bar,
        core_equilibrium_exists,
        eta_bar: core.and_then(|c| c.eta_bar),
        eta_bar_literal: core.and_then(|c| c.eta_bar_literal),
        e_min: core.map(|c| c.e_min),
        e_min_literal: core.and_then(|c| c.e_min_literal),
        lambda_ratio,
        certainty_threshold,
        certainty_margin,
        certainty_threshold_model,
        delta_v_eff: pi * tilt(&coeffs),
        delta_e_bound: beta * (T::lit(8.0) * coeffs.a_core).sqrt(),
        delta_e_bound_literal: beta * params.omega * (T::lit(8.0) * es).sqrt(),
        certain: core_equilibrium_exists && certainty_margin > T::zero(),
    })
}

/// Capture analysis for a co-rotating crust and core (`vη = 0`).
pub fn capture_certainty<T: Scalar>(params: &BodyParameters<T>, k: u32) -> Result<CaptureVerdict<T>> {
    capture_verdict(params, k, T::zero())
}
