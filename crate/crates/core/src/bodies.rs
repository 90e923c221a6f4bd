//! Physical parameter sets, moments of inertia, the two friction
//! coefficients and the characteristic timescales they imply.
//!
//! Everything here is SI. The viscosity of the interface fluid is called
//! `eta_fluid` to keep it apart from the core's resonant angle.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kepler::check_eccentricity;
use crate::scalar::Scalar;

/// Gravitational constant (m³ kg⁻¹ s⁻²).
pub const G: f64 = 6.674e-11;
/// Julian-ish year used for every year-based output.
pub const SECONDS_PER_YEAR: f64 = 3.156e7;
/// Environment variable naming a directory of body parameter files.
pub const DATA_DIR_ENV: &str = "SPINORBIT_DATA_DIR";

const GANYMEDE: &str = include_str!("../data/ganymede.toml");
const MERCURY: &str = include_str!("../data/mercury.toml");

/// Names of the parameter files shipped with the crate.
pub const BUILTIN_BODIES: [&str; 2] = ["ganymede", "mercury"];

fn default_inertia_factor<T: Scalar>() -> T {
    T::lit(0.4)
}

fn default_crust_inertia_ratio<T: Scalar>() -> T {
    T::lit(1e-3)
}

/// A primary (the spinning two-layer body) and its orbit about the secondary.
///
/// Serialized keys follow the conventional symbols (`R`, `m`, `Q`, ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct BodyParameters<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Orbital mean motion (rad/s).
    pub omega: T,
    /// Semi-major axis (m).
    pub a: T,
    pub e: T,
    /// Mean radius (m).
    #[serde(rename = "R")]
    pub radius: T,
    /// Mass of the primary (kg).
    #[serde(rename = "m")]
    pub mass: T,
    /// Mass of the secondary (kg). Derived from Kepler's third law when absent.
    #[serde(rename = "M_secondary", default, skip_serializing_if = "Option::is_none")]
    pub secondary_mass: Option<T>,
    /// Equatorial ellipticity of the core.
    pub epsilon: T,
    /// Equatorial ellipticity of the crust; defaults to `epsilon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_prime: Option<T>,
    #[serde(rename = "Q")]
    pub q: T,
    pub k2: T,
    /// Viscosity of the fluid layer between crust and core (Pa·s).
    pub eta_fluid: T,
    /// Depth of the fluid layer (m).
    pub h: T,
    /// `α` in `C_total = α·m·R²`.
    #[serde(default = "default_inertia_factor")]
    pub inertia_factor: T,
    /// `C′ / C_total`.
    #[serde(default = "default_crust_inertia_ratio")]
    pub crust_inertia_ratio: T,
    /// Fields whose values are literature estimates.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimated: Vec<String>,
}

fn positive<T: Scalar>(name: &'static str, value: T) -> Result<()> {
    if value > T::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {value}")))
    }
}

impl<T: Scalar> BodyParameters<T> {
    pub fn validate(&self) -> Result<()> {
        positive("omega", self.omega)?;
        positive("a", self.a)?;
        check_eccentricity(self.e)?;
        positive("R", self.radius)?;
        positive("m", self.mass)?;
        positive("epsilon", self.epsilon)?;
        if let Some(eps) = self.epsilon_prime {
            positive("epsilon_prime", eps)?;
        }
        positive("Q", self.q)?;
        positive("k2", self.k2)?;
        positive("eta_fluid", self.eta_fluid)?;
        positive("h", self.h)?;
        positive("inertia_factor", self.inertia_factor)?;
        let ratio = self.crust_inertia_ratio;
        if !(ratio > T::zero() && ratio < T::one()) {
            return Err(Error::param(
                "crust_inertia_ratio",
                format!("must lie in (0, 1), got {ratio}"),
            ));
        }
        if let Some(mass) = self.secondary_mass {
            positive("M_secondary", mass)?;
            let kepler = self.omega * self.omega * self.a.powi(3);
            let mismatch = ((T::lit(G) * mass - kepler) / kepler).abs();
            if mismatch >= T::lit(0.05) {
                return Err(Error::param(
                    "M_secondary",
                    format!("G·M differs from ω²a³ by {:.1}%", mismatch.as_f64() * 100.0),
                ));
            }
        }
        Ok(())
    }

    pub fn epsilon_crust(&self) -> T {
        self.epsilon_prime.unwrap_or(self.epsilon)
    }

    /// Secondary mass, from Kepler's third law `GM = ω²a³` if not given.
    pub fn secondary_mass(&self) -> T {
        self.secondary_mass
            .unwrap_or_else(|| self.omega * self.omega * self.a.powi(3) / T::lit(G))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let params: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// One of the shipped parameter sets, ignoring the data-directory override.
    pub fn builtin(name: &str) -> Result<Self> {
        let text = match name {
            "ganymede" => GANYMEDE,
            "mercury" => MERCURY,
            other => return Err(Error::UnknownBody(other.to_string())),
        };
        Self::from_toml_str(text)
    }

    /// Resolves a body reference: an existing file path, then
    /// `$SPINORBIT_DATA_DIR/<name>.toml`, then the shipped sets.
    pub fn load(reference: &str) -> Result<Self> {
        let path = Path::new(reference);
        if path.is_file() {
            return Self::from_path(path);
        }
        if let Some(file) = data_dir_file(reference) {
            return Self::from_path(file);
        }
        Self::builtin(reference)
    }

    /// `(B − A)` of the core, from `ε = (3/2)(B − A)/C`.
    pub fn core_asymmetry(&self) -> T {
        let (core, _) = moments_of_inertia(self);
        T::lit(2.0 / 3.0) * self.epsilon * core
    }

    /// `(B′ − A′)` of the crust.
    pub fn crust_asymmetry(&self) -> T {
        let (_, crust) = moments_of_inertia(self);
        T::lit(2.0 / 3.0) * self.epsilon_crust() * crust
    }
}

fn data_dir_file(name: &str) -> Option<PathBuf> {
    let dir = std::env::var_os(DATA_DIR_ENV)?;
    let file = Path::new(&dir).join(format!("{name}.toml"));
    file.is_file().then_some(file)
}

/// `(C, C′)`: the spin moments of inertia of core and crust.
pub fn moments_of_inertia<T: Scalar>(params: &BodyParameters<T>) -> (T, T) {
    let total = params.inertia_factor * params.mass * params.radius * params.radius;
    let crust = params.crust_inertia_ratio * total;
    (total - crust, crust)
}

/// Viscous crust–core coupling `λ = (8π/3)·η·R⁴/h` of a laminar fluid shell.
pub fn viscous_lambda<T: Scalar>(params: &BodyParameters<T>) -> Result<T> {
    if !(params.h > T::zero()) {
        return Err(Error::Domain("fluid layer depth h must be positive".into()));
    }
    let coefficient = T::lit(8.0) * T::PI() / T::lit(3.0);
    Ok(coefficient * params.eta_fluid * params.radius.powi(4) / params.h)
}

fn check_index(k: u32) -> Result<()> {
    if k == 0 {
        Err(Error::Domain(
            "the viscoelastic coupling is undefined at k = 0 (synchronous state)".into(),
        ))
    } else {
        Ok(())
    }
}

/// Magnitude of MacDonald's tidal torque, `(3/2)(k2/Q)·G·m²·R⁵/a⁶`.
pub fn tidal_torque<T: Scalar>(params: &BodyParameters<T>) -> T {
    // G·(m/a³)²·R⁵ keeps every intermediate inside the f32 range.
    let density_like = params.mass / params.a.powi(3);
    T::lit(1.5) * params.k2 / params.q
        * T::lit(G)
        * density_like
        * density_like
        * params.radius.powi(5)
}

/// Viscoelastic coupling `λ′` obtained by linearising the tidal torque about
/// the drift `kω/2` of resonance `k`.
pub fn viscoelastic_lambda<T: Scalar>(params: &BodyParameters<T>, k: u32) -> Result<T> {
    check_index(k)?;
    let drift = T::from_u32(k).unwrap() * params.omega / T::lit(2.0);
    Ok(tidal_torque(params) / drift)
}

/// `λ/λ′ = 8π·η·a⁶·Q·k·ω / (9·h·k2·G·m²·R)`, evaluated in closed form.
pub fn coupling_ratio<T: Scalar>(params: &BodyParameters<T>, k: u32) -> Result<T> {
    check_index(k)?;
    if !(params.h > T::zero()) {
        return Err(Error::Domain("fluid layer depth h must be positive".into()));
    }
    let a3_over_m = params.a.powi(3) / params.mass;
    let numerator = T::lit(8.0)
        * T::PI()
        * params.eta_fluid
        * params.q
        * T::from_u32(k).unwrap()
        * params.omega;
    let denominator = T::lit(9.0) * params.h * params.k2 * T::lit(G) * params.radius;
    Ok(numerator / denominator * a3_over_m * a3_over_m)
}

/// The two couplings together with the inertias they act on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CouplingSet<T> {
    pub lambda: T,
    pub lambda_prime: T,
    #[serde(rename = "C")]
    pub c: T,
    #[serde(rename = "C_prime")]
    pub c_prime: T,
}

impl<T: Scalar> CouplingSet<T> {
    pub fn new(lambda: T, lambda_prime: T, c: T, c_prime: T) -> Result<Self> {
        positive("lambda", lambda)?;
        positive("lambda_prime", lambda_prime)?;
        positive("C", c)?;
        positive("C_prime", c_prime)?;
        if !(c_prime < c) {
            return Err(Error::param("C_prime", "crust inertia must be below the core's"));
        }
        Ok(Self {
            lambda,
            lambda_prime,
            c,
            c_prime,
        })
    }

    pub fn for_body(params: &BodyParameters<T>, k: u32) -> Result<Self> {
        let (c, c_prime) = moments_of_inertia(params);
        Self::new(
            viscous_lambda(params)?,
            viscoelastic_lambda(params, k)?,
            c,
            c_prime,
        )
    }
}

/// Crust relaxation, core relaxation and tidal (exit) timescales.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Timescales<T> {
    pub tau_gamma: T,
    pub tau_eta: T,
    pub tau_eta_prime: T,
}

impl<T: Scalar> Timescales<T> {
    pub fn is_ordered(&self) -> bool {
        self.tau_gamma < self.tau_eta && self.tau_eta < self.tau_eta_prime
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            tau_gamma: self.tau_gamma * factor,
            tau_eta: self.tau_eta * factor,
            tau_eta_prime: self.tau_eta_prime * factor,
        }
    }
}

/// `(C′/λ, C/λ, C/λ′)`.
pub fn timescales<T: Scalar>(coupling: &CouplingSet<T>) -> Timescales<T> {
    Timescales {
        tau_gamma: coupling.c_prime / coupling.lambda,
        tau_eta: coupling.c / coupling.lambda,
        tau_eta_prime: coupling.c / coupling.lambda_prime,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_body() -> BodyParameters<f64> {
        BodyParameters {
            name: None,
            omega: 1.0,
            a: 1.0,
            e: 0.1,
            radius: 1.0,
            mass: 1.0,
            secondary_mass: None,
            epsilon: 1e-3,
            epsilon_prime: None,
            q: 1.0,
            k2: 1.0,
            eta_fluid: 1.0,
            h: 1.0,
            inertia_factor: 0.4,
            crust_inertia_ratio: 0.5,
            estimated: vec![],
        }
    }

    #[test]
    fn inertia_split() {
        let mut body = unit_body();
        let (c, cp) = moments_of_inertia(&body);
        assert_relative_eq!(c, 0.2);
        assert_relative_eq!(cp, 0.2);
        body.crust_inertia_ratio = 0.0;
        assert_eq!(moments_of_inertia(&body), (0.4, 0.0));
        // Zero crust is outside the validated domain.
        assert!(body.validate().is_err());
    }

    #[test]
    fn ganymede_inertia() {
        let g = BodyParameters::<f64>::builtin("ganymede").unwrap();
        let total = 0.4 * 1.5e23 * 2.6e6_f64.powi(2);
        let (c, cp) = moments_of_inertia(&g);
        assert_relative_eq!(c, total * (1.0 - 1e-3), max_relative = 1e-12);
        assert_relative_eq!(cp, total * 1e-3, max_relative = 1e-12);
        assert_relative_eq!(total, 4.056e35, max_relative = 1e-3);
    }

    #[test]
    fn viscous_coupling_values() {
        let mut body = unit_body();
        assert_relative_eq!(viscous_lambda(&body).unwrap(), 8.0 * std::f64::consts::PI / 3.0);
        body.h = 2.0;
        assert_relative_eq!(viscous_lambda(&body).unwrap(), 4.0 * std::f64::consts::PI / 3.0);
        body.h = 0.0;
        assert!(matches!(viscous_lambda(&body), Err(Error::Domain(_))));
        let g = BodyParameters::<f64>::builtin("ganymede").unwrap();
        assert_relative_eq!(viscous_lambda(&g).unwrap(), 6.1e18, max_relative = 0.01);
    }

    #[test]
    fn viscoelastic_scaling() {
        let mut body = unit_body();
        let base = viscoelastic_lambda(&body, 1).unwrap();
        body.k2 = 2.0;
        assert_relative_eq!(viscoelastic_lambda(&body, 1).unwrap(), 2.0 * base);
        assert_relative_eq!(viscoelastic_lambda(&body, 2).unwrap(), base);
        assert!(viscoelastic_lambda(&body, 0).is_err());
        assert!(coupling_ratio(&body, 0).is_err());
    }

    #[test]
    fn mercury_torque_identity() {
        let m = BodyParameters::<f64>::builtin("mercury").unwrap();
        let lp = viscoelastic_lambda(&m, 1).unwrap();
        let direct = 1.5 * (0.1 / 100.0) * G * 3.3e23_f64.powi(2) * 2.4e6_f64.powi(5)
            / 5.8e10_f64.powi(6);
        assert_relative_eq!(lp * 8.3e-7 / 2.0, direct, max_relative = 1e-12);
    }

    #[test]
    fn ratio_is_closure_of_couplings() {
        for name in BUILTIN_BODIES {
            let body = BodyParameters::<f64>::builtin(name).unwrap();
            for k in 1..4 {
                let ratio = coupling_ratio(&body, k).unwrap();
                let closure =
                    viscous_lambda(&body).unwrap() / viscoelastic_lambda(&body, k).unwrap();
                assert_relative_eq!(ratio, closure, max_relative = 1e-12);
            }
            let one = coupling_ratio(&body, 1).unwrap();
            assert_relative_eq!(coupling_ratio(&body, 2).unwrap(), 2.0 * one, max_relative = 1e-12);
        }
    }

    #[test]
    fn timescale_ratios() {
        let set = CouplingSet::new(1.0, 0.1, 1.0, 0.5).unwrap();
        let t = timescales(&set);
        assert_eq!((t.tau_gamma, t.tau_eta, t.tau_eta_prime), (0.5, 1.0, 10.0));
        assert!(t.is_ordered());
        assert!(CouplingSet::new(1.0, 0.1, 0.5, 1.0).is_err());
    }

    #[test]
    fn secondary_mass_consistency() {
        let mut g = BodyParameters::<f64>::builtin("ganymede").unwrap();
        assert_relative_eq!(g.secondary_mass(), 1.99e27, max_relative = 0.01);
        g.secondary_mass = Some(1.898e27);
        assert!(g.validate().is_ok());
        g.secondary_mass = Some(1.0e27);
        assert!(g.validate().is_err());
    }

    #[test]
    fn rejects_bad_fields() {
        let mut body = unit_body();
        body.e = 1.0;
        assert!(body.validate().is_err());
        let mut body = unit_body();
        body.q = -1.0;
        assert!(body.validate().is_err());
        assert!(BodyParameters::<f64>::from_toml_str("omega = 1.0").is_err());
        assert!(matches!(
            BodyParameters::<f64>::builtin("pluto"),
            Err(Error::UnknownBody(_))
        ));
    }

    #[test]
    fn toml_round_trip() {
        let g = BodyParameters::<f64>::builtin("ganymede").unwrap();
        let text = g.to_toml_string().unwrap();
        assert!(text.contains("R = "));
        assert_eq!(BodyParameters::from_toml_str(&text).unwrap(), g);
    }

    #[test]
    fn single_precision_ratio() {
        let g = BodyParameters::<f32>::builtin("ganymede").unwrap();
        let r = coupling_ratio(&g, 1).unwrap();
        assert!(r.is_finite() && (r / 1.0e3 - 1.0).abs() < 0.05, "{r}");
        assert!(viscoelastic_lambda(&g, 1).unwrap().is_finite());
    }
}
