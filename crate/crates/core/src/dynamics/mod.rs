//! Crust/core vector fields, orbit-averaged and exact, and their integration.
//!
//! The averaged fields work in the resonant frame (`γ`, `η` and their rates).
//! The unaveraged field works with the angles `φ`, `ν` of each shell's long
//! axis measured from the line to the secondary.

pub mod integrator;
mod trajectory;

use serde::{Deserialize, Serialize};

use crate::bodies::{moments_of_inertia, BodyParameters, CouplingSet, SECONDS_PER_YEAR};
use crate::error::{Error, Result};
use crate::kepler::{check_eccentricity, harmonic_strength, solve_kepler, true_anomaly, ExpansionTable};
use crate::scalar::Scalar;

pub use integrator::{IntegrationStats, IntegratorOptions, OdeSystem, Sampling};
pub use trajectory::{Trajectory, CSV_HEADER};

/// Unit of the time axis a coefficient set is expressed in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Seconds,
    #[default]
    Years,
}

impl TimeUnit {
    pub fn seconds(self) -> f64 {
        match self {
            TimeUnit::Seconds => 1.0,
            TimeUnit::Years => SECONDS_PER_YEAR,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            TimeUnit::Seconds => "s",
            TimeUnit::Years => "yr",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpinState<T> {
    pub t: T,
    pub gamma: T,
    pub v_gamma: T,
    pub eta: T,
    pub v_eta: T,
}

impl<T: Scalar> SpinState<T> {
    pub fn new(t: T, gamma: T, v_gamma: T, eta: T, v_eta: T) -> Self {
        Self {
            t,
            gamma,
            v_gamma,
            eta,
            v_eta,
        }
    }

    pub fn vector(&self) -> [T; 4] {
        [self.gamma, self.v_gamma, self.eta, self.v_eta]
    }

    pub fn from_vector(t: T, y: [T; 4]) -> Self {
        Self::new(t, y[0], y[1], y[2], y[3])
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.vector().iter().all(|v| v.is_finite())
    }
}

/// Time derivative of a [`SpinState`] (without the trivial `dt/dt = 1`).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SpinRates<T> {
    pub gamma: T,
    pub v_gamma: T,
    pub eta: T,
    pub v_eta: T,
}

impl<T: Scalar> SpinRates<T> {
    pub fn vector(&self) -> [T; 4] {
        [self.gamma, self.v_gamma, self.eta, self.v_eta]
    }

    pub fn is_finite(&self) -> bool {
        self.vector().iter().all(|v| v.is_finite())
    }
}

/// Coefficients of the orbit-averaged two-pendulum system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelCoefficients<T> {
    /// Crust torque amplitude `(3/(4C′))(B′−A′)ω²·a_k eᵏ`.
    #[serde(rename = "A_crust")]
    pub a_crust: T,
    /// Core torque amplitude `(3/(4C))(B−A)ω²·a_k eᵏ`.
    #[serde(rename = "A_core")]
    pub a_core: T,
    /// `λ/C′`
    pub inv_tau_gamma: T,
    /// `λ/C`
    pub inv_tau_eta: T,
    /// `λ′/C`
    pub inv_tau_eta_prime: T,
    /// `kω/2`
    pub drift: T,
    pub k: u32,
    pub time_unit: TimeUnit,
}

impl<T: Scalar> ModelCoefficients<T> {
    /// The printed year-based coefficient set used for the two figure runs.
    pub fn eq35() -> Self {
        Self {
            a_crust: T::lit(202.5),
            a_core: T::lit(0.0135),
            inv_tau_gamma: T::lit(0.167),
            inv_tau_eta: T::lit(6.67e-7),
            inv_tau_eta_prime: T::lit(6.67e-10),
            drift: T::lit(150.0),
            k: 1,
            time_unit: TimeUnit::Years,
        }
    }

    /// Derives every coefficient from a parameter set. Fails at `k = 0`,
    /// where the tidal coupling is undefined; use [`Self::from_coupling`].
    pub fn from_body(params: &BodyParameters<T>, k: u32, unit: TimeUnit) -> Result<Self> {
        params.validate()?;
        let coupling = CouplingSet::for_body(params, k)?;
        Self::from_coupling(params, &coupling, k, unit)
    }

    pub fn from_coupling(
        params: &BodyParameters<T>,
        coupling: &CouplingSet<T>,
        k: u32,
        unit: TimeUnit,
    ) -> Result<Self> {
        let s = T::lit(unit.seconds());
        let half = T::lit(0.5);
        let strength = harmonic_strength(k as usize, params.e)?;
        let w2 = params.omega * params.omega * s * s;
        let coeffs = Self {
            a_crust: half * params.epsilon_crust() * w2 * strength,
            a_core: half * params.epsilon * w2 * strength,
            inv_tau_gamma: coupling.lambda / coupling.c_prime * s,
            inv_tau_eta: coupling.lambda / coupling.c * s,
            inv_tau_eta_prime: coupling.lambda_prime / coupling.c * s,
            drift: T::from_u32(k).unwrap() * params.omega * s * half,
            k,
            time_unit: unit,
        };
        coeffs.validate()?;
        Ok(coeffs)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("A_crust", self.a_crust),
            ("A_core", self.a_core),
            ("inv_tau_gamma", self.inv_tau_gamma),
            ("inv_tau_eta", self.inv_tau_eta),
            ("inv_tau_eta_prime", self.inv_tau_eta_prime),
            ("drift", self.drift),
        ];
        for (name, value) in fields {
            if !(value >= T::zero()) || !value.is_finite() {
                return Err(Error::param(name, format!("must be finite and non-negative, got {value}")));
            }
        }
        Ok(())
    }

    /// Same coefficients with every dissipative term switched off.
    pub fn conservative(&self) -> Self {
        Self {
            inv_tau_gamma: T::zero(),
            inv_tau_eta: T::zero(),
            inv_tau_eta_prime: T::zero(),
            ..*self
        }
    }

    /// Re-expresses the coefficients on another time axis.
    pub fn in_unit(&self, unit: TimeUnit) -> Self {
        let r = T::lit(unit.seconds() / self.time_unit.seconds());
        Self {
            a_crust: self.a_crust * r * r,
            a_core: self.a_core * r * r,
            inv_tau_gamma: self.inv_tau_gamma * r,
            inv_tau_eta: self.inv_tau_eta * r,
            inv_tau_eta_prime: self.inv_tau_eta_prime * r,
            drift: self.drift * r,
            k: self.k,
            time_unit: unit,
        }
    }
}

/// A vector field over [`SpinState`].
pub trait SpinField<T: Scalar> {
    fn rates(&self, state: &SpinState<T>) -> SpinRates<T>;
}

/// The averaged coupled system.
///
/// `v̇γ = −A_crust·sin 2γ − (λ/C′)(vγ − vη)`,
/// `v̇η = −A_core·sin 2η + (λ/C)(vγ − vη) − (λ′/C)(vη + kω/2)`.
pub fn averaged_field<T: Scalar>(state: &SpinState<T>, c: &ModelCoefficients<T>) -> SpinRates<T> {
    let two = T::lit(2.0);
    let slip = state.v_gamma - state.v_eta;
    SpinRates {
        gamma: state.v_gamma,
        v_gamma: -c.a_crust * (two * state.gamma).sin() - c.inv_tau_gamma * slip,
        eta: state.v_eta,
        v_eta: -c.a_core * (two * state.eta).sin() + c.inv_tau_eta * slip
            - c.inv_tau_eta_prime * (state.v_eta + c.drift),
    }
}

/// `(γ̇, v̇γ)` with the core rate held at `v_eta_frozen`.
pub fn decoupled_crust_field<T: Scalar>(
    state: &SpinState<T>,
    c: &ModelCoefficients<T>,
    v_eta_frozen: T,
) -> (T, T) {
    let two = T::lit(2.0);
    (
        state.v_gamma,
        -c.a_crust * (two * state.gamma).sin() - c.inv_tau_gamma * (state.v_gamma - v_eta_frozen),
    )
}

/// `(η̇, v̇η)` with the crust locked, `vγ = 0`.
pub fn decoupled_core_field<T: Scalar>(state: &SpinState<T>, c: &ModelCoefficients<T>) -> (T, T) {
    let two = T::lit(2.0);
    (
        state.v_eta,
        -c.a_core * (two * state.eta).sin()
            - c.inv_tau_eta * state.v_eta
            - c.inv_tau_eta_prime * (state.v_eta + c.drift),
    )
}

impl<T: Scalar> SpinField<T> for ModelCoefficients<T> {
    fn rates(&self, state: &SpinState<T>) -> SpinRates<T> {
        averaged_field(state, self)
    }
}

/// Crust dynamics against a core spinning at a fixed rate. The core angle
/// advances at that rate so trajectories stay meaningful.
#[derive(Clone, Copy, Debug)]
pub struct DecoupledCrust<T> {
    pub coeffs: ModelCoefficients<T>,
    pub v_eta_frozen: T,
}

impl<T: Scalar> SpinField<T> for DecoupledCrust<T> {
    fn rates(&self, state: &SpinState<T>) -> SpinRates<T> {
        let (gamma, v_gamma) = decoupled_crust_field(state, &self.coeffs, self.v_eta_frozen);
        SpinRates {
            gamma,
            v_gamma,
            eta: self.v_eta_frozen,
            v_eta: T::zero(),
        }
    }
}

/// Core dynamics under a locked crust. The crust variables stay put.
#[derive(Clone, Copy, Debug)]
pub struct DecoupledCore<T>(pub ModelCoefficients<T>);

impl<T: Scalar> SpinField<T> for DecoupledCore<T> {
    fn rates(&self, state: &SpinState<T>) -> SpinRates<T> {
        let (eta, v_eta) = decoupled_core_field(state, &self.0);
        SpinRates {
            gamma: T::zero(),
            v_gamma: T::zero(),
            eta,
            v_eta,
        }
    }
}

/// Coefficients of the exact, time-periodic equations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UnaveragedCoefficients<T> {
    /// `(3/2)(B′−A′)ω²/C′`, the peak crust torque per unit inertia at `ρ = a`.
    pub crust_torque: T,
    pub core_torque: T,
    pub inv_tau_gamma: T,
    pub inv_tau_eta: T,
    pub inv_tau_eta_prime: T,
    /// Orbital mean motion in the chosen time unit.
    pub omega: T,
    pub e: T,
    pub k: u32,
    pub time_unit: TimeUnit,
}

impl<T: Scalar> UnaveragedCoefficients<T> {
    pub fn from_body(params: &BodyParameters<T>, k: u32, unit: TimeUnit) -> Result<Self> {
        params.validate()?;
        let coupling = CouplingSet::for_body(params, k)?;
        let s = T::lit(unit.seconds());
        let w = params.omega * s;
        Ok(Self {
            crust_torque: params.epsilon_crust() * w * w,
            core_torque: params.epsilon * w * w,
            inv_tau_gamma: coupling.lambda / coupling.c_prime * s,
            inv_tau_eta: coupling.lambda / coupling.c * s,
            inv_tau_eta_prime: coupling.lambda_prime / coupling.c * s,
            omega: w,
            e: params.e,
            k,
            time_unit: unit,
        })
    }

    /// The exact system whose orbit average is `averaged` at eccentricity `e`.
    /// The mean motion follows from `drift = kω/2`, so `k ≥ 1`.
    pub fn from_averaged(averaged: &ModelCoefficients<T>, e: T) -> Result<Self> {
        check_eccentricity(e)?;
        if averaged.k == 0 {
            return Err(Error::Domain("the mean motion cannot be recovered at k = 0".into()));
        }
        let strength = harmonic_strength(averaged.k as usize, e)?;
        if !(strength > T::zero()) {
            return Err(Error::Domain(format!(
                "harmonic {} vanishes at e = {e}",
                averaged.k
            )));
        }
        let two = T::lit(2.0);
        Ok(Self {
            crust_torque: two * averaged.a_crust / strength,
            core_torque: two * averaged.a_core / strength,
            inv_tau_gamma: averaged.inv_tau_gamma,
            inv_tau_eta: averaged.inv_tau_eta,
            inv_tau_eta_prime: averaged.inv_tau_eta_prime,
            omega: two * averaged.drift / T::from_u32(averaged.k).unwrap(),
            e,
            k: averaged.k,
            time_unit: averaged.time_unit,
        })
    }

    fn drift(&self) -> T {
        T::from_u32(self.k).unwrap() * self.omega / T::lit(2.0)
    }

    /// `(ϑ − M, ϑ̇ − ω)` at time `t`: the equation of the centre and its rate.
    fn centre(&self, t: T) -> (T, T) {
        let m = self.omega * t;
        let theta = true_anomaly(m, self.e).unwrap_or_else(|_| T::nan());
        let one = T::one();
        let p = one + self.e * theta.cos();
        let root = (one - self.e * self.e).sqrt();
        let theta_dot = self.omega * p * p / (root * root * root);
        (theta - m, theta_dot - self.omega)
    }

    /// Resonant-frame state `(γ, vγ, η, vη)` to absolute `(φ, φ̇, ν, ν̇)`.
    ///
    /// The resonant angle is tied to the inertial orientation `φ + ϑ`:
    /// `γ = φ + ϑ − (k/2 + 1)·ωt`. On a circular orbit this is `φ − kωt/2`.
    pub fn to_absolute(&self, state: &SpinState<T>) -> SpinState<T> {
        let phase = self.drift() * state.t;
        let (lag, lag_rate) = self.centre(state.t);
        SpinState::new(
            state.t,
            state.gamma + phase - lag,
            state.v_gamma + self.drift() - lag_rate,
            state.eta + phase - lag,
            state.v_eta + self.drift() - lag_rate,
        )
    }

    pub fn to_resonant(&self, state: &SpinState<T>) -> SpinState<T> {
        let phase = self.drift() * state.t;
        let (lag, lag_rate) = self.centre(state.t);
        SpinState::new(
            state.t,
            state.gamma - phase + lag,
            state.v_gamma - self.drift() + lag_rate,
            state.eta - phase + lag,
            state.v_eta - self.drift() + lag_rate,
        )
    }
}

/// Orbital quantities entering the exact field at time `t`: `(a/ρ)³` and `ϑ̈`.
fn orbit_forcing<T: Scalar>(t: T, omega: T, e: T) -> (T, T) {
    let one = T::one();
    let m = omega * t;
    // `e` was validated on construction; a failure here can only come from
    // a non-finite time, which the integrator reports.
    let big_e = solve_kepler(m, e).unwrap_or_else(|_| T::nan());
    let denom = one - e * big_e.cos();
    let r3 = denom.powi(-3);
    let root = (one - e * e).sqrt();
    let cos_v = (big_e.cos() - e) / denom;
    let sin_v = root * big_e.sin() / denom;
    let p = one + e * cos_v;
    let theta_dot = omega * p * p / (root * root * root);
    let theta_ddot = -T::lit(2.0) * e * sin_v * theta_dot * theta_dot / p;
    (r3, theta_ddot)
}

/// The exact equations in absolute angles, with the state fields read as
/// `(φ, φ̇, ν, ν̇)`:
///
/// `φ̈ = −ε′ω²(a/ρ)³ sin 2φ − ϑ̈ − (λ/C′)(φ̇ − ν̇)`,
/// `ν̈ = −εω²(a/ρ)³ sin 2ν − ϑ̈ + (λ/C)(φ̇ − ν̇) − (λ′/C)ν̇`.
pub fn unaveraged_field<T: Scalar>(
    state: &SpinState<T>,
    c: &UnaveragedCoefficients<T>,
) -> SpinRates<T> {
    let two = T::lit(2.0);
    let (r3, theta_ddot) = orbit_forcing(state.t, c.omega, c.e);
    let slip = state.v_gamma - state.v_eta;
    SpinRates {
        gamma: state.v_gamma,
        v_gamma: -c.crust_torque * r3 * (two * state.gamma).sin()
            - theta_ddot
            - c.inv_tau_gamma * slip,
        eta: state.v_eta,
        v_eta: -c.core_torque * r3 * (two * state.eta).sin() - theta_ddot
            + c.inv_tau_eta * slip
            - c.inv_tau_eta_prime * state.v_eta,
    }
}

impl<T: Scalar> SpinField<T> for UnaveragedCoefficients<T> {
    fn rates(&self, state: &SpinState<T>) -> SpinRates<T> {
        unaveraged_field(state, self)
    }
}

struct FieldSystem<'a, F>(&'a F);

impl<T: Scalar, F: SpinField<T>> OdeSystem<T, 4> for FieldSystem<'_, F> {
    fn rhs(&self, t: T, y: &[T; 4]) -> [T; 4] {
        self.0.rates(&SpinState::from_vector(t, *y)).vector()
    }
}

pub const MIN_TOLERANCE: f64 = 1e-12;
pub const MAX_TOLERANCE: f64 = 1e-3;

/// Integrates `field` from `initial` to `t_end`.
///
/// `options.rtol` must lie in `[1e-12, 1e-3]`. A zero-length span returns the
/// initial state alone.
pub fn integrate<T: Scalar, F: SpinField<T>>(
    field: &F,
    initial: SpinState<T>,
    t_end: T,
    options: &IntegratorOptions<T>,
    time_unit: TimeUnit,
) -> Result<Trajectory<T>> {
    let tol = options.rtol.as_f64();
    if !(MIN_TOLERANCE..=MAX_TOLERANCE).contains(&tol) {
        return Err(Error::param(
            "tol",
            format!("{tol:e} outside [{MIN_TOLERANCE:e}, {MAX_TOLERANCE:e}]"),
        ));
    }
    if !initial.is_finite() {
        return Err(Error::NonFinite {
            t: initial.t.as_f64(),
            state: initial.vector().iter().map(|v| v.as_f64()).collect(),
        });
    }
    if !(t_end >= initial.t) {
        return Err(Error::param("t_end", "must not precede the initial time"));
    }
    let solution = integrator::dopri5(&FieldSystem(field), initial.t, initial.vector(), t_end, options)?;
    let samples = solution
        .times
        .iter()
        .zip(&solution.states)
        .map(|(&t, y)| SpinState::from_vector(t, *y))
        .collect();
    Ok(Trajectory::new(samples, solution.stats, time_unit))
}

/// Pendulum energies `½v² − (A/2)·cos 2θ` of crust and core.
pub fn pendulum_energies<T: Scalar>(state: &SpinState<T>, c: &ModelCoefficients<T>) -> (T, T) {
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    (
        half * state.v_gamma * state.v_gamma - half * c.a_crust * (two * state.gamma).cos(),
        half * state.v_eta * state.v_eta - half * c.a_core * (two * state.eta).cos(),
    )
}

/// Orbit-averaged shell energies `⟨E_γ⟩`, `⟨E_η⟩` in joules, constant offsets
/// included. `state` must be in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShellEnergies<T> {
    pub crust: T,
    pub core: T,
}

pub fn averaged_shell_energies<T: Scalar>(
    state: &SpinState<T>,
    params: &BodyParameters<T>,
    k: u32,
    table: &ExpansionTable<T>,
) -> Result<ShellEnergies<T>> {
    if (k as usize) > table.max_order {
        return Err(Error::param("k", "exceeds the expansion table order"));
    }
    let (c, c_prime) = moments_of_inertia(params);
    let w = params.omega;
    let e = table.e;
    let half = T::lit(0.5);
    let base = (T::from_u32(k).unwrap() * half + T::one()) * w;
    // Σ n²ω²c_n²e²ⁿ/2: the mean square of the true-anomaly rate fluctuation.
    let mut fluctuation = T::zero();
    for n in 1..=table.max_order {
        let cn = table.c_coeffs[n] * e.powi(n as i32);
        let nf = T::from_usize(n).unwrap();
        fluctuation += nf * nf * w * w * cn * cn * half;
    }
    let strength = table.a_coeffs[k as usize] * e.powi(k as i32);
    let well = |angle: T| T::one() + T::lit(1.5) * (T::lit(2.0) * angle).cos() * strength;
    let kinetic = |inertia: T, v: T| half * inertia * ((v + base) * (v + base) + fluctuation);
    let quarter_w2 = w * w * T::lit(0.25);
    Ok(ShellEnergies {
        crust: kinetic(c_prime, state.v_gamma) - params.crust_asymmetry() * quarter_w2 * well(state.gamma),
        core: kinetic(c, state.v_eta) - params.core_asymmetry() * quarter_w2 * well(state.eta),
    })
}
