//! Scenario files and the built-in figure presets.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! body = "ganymede"        # file path, $SPINORBIT_DATA_DIR name, or shipped set
//! k = 1
//! coefficients = "derived" # or "eq35"
//! time_unit = "years"      # or "seconds"
//! t_end = 100.0
//! tol = 1e-8
//! sample_interval = 1.0
//! lock_window = 10.0       # optional, defaults to t_end / 10
//!
//! [initial]
//! gamma = 0.1
//! v_gamma = 1000.0
//! eta = 0.1
//! v_eta = 50.0
//!
//! [output]
//! path = "runs/fig3"       # stem: writes runs/fig3.csv and runs/fig3.json
//! format = "csv"
//! stride = 1
//! panels = false           # also write <stem>.crust.csv and <stem>.core.csv
//! ```
//!
//! The JSON summary of a run embeds the resolved scenario under `config` and
//! is itself accepted as a scenario file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinorbit::dynamics::TimeUnit;
use spinorbit::{BodyParameters, ModelCoefficients, SpinState};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientSource {
    /// Computed from the body's parameter set.
    Derived,
    /// The printed year-based coefficient set.
    Eq35,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default)]
    pub t: f64,
    pub gamma: f64,
    pub v_gamma: f64,
    pub eta: f64,
    pub v_eta: f64,
}

impl InitialState {
    pub fn state(&self) -> SpinState {
        SpinState::new(self.t, self.gamma, self.v_gamma, self.eta, self.v_eta)
    }
}

fn default_stride() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub panels: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            path: None,
            format: OutputFormat::Csv,
            stride: 1,
            panels: false,
        }
    }
}

fn default_k() -> u32 {
    1
}

fn default_tol() -> f64 {
    1e-8
}

fn default_sample_interval() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(default = "default_k")]
    pub k: u32,
    pub coefficients: CoefficientSource,
    #[serde(default)]
    pub time_unit: TimeUnit,
    pub initial: InitialState,
    /// Duration of the run in `time_unit`.
    pub t_end: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lock_window: Option<f64>,
    #[serde(default)]
    pub output: OutputSpec,
}

pub const PRESETS: [&str; 3] = ["fig3", "fig4", "eq35"];

impl ScenarioConfig {
    /// `fig3`, `fig4` (the two printed figure runs) or `eq35` (the printed
    /// coefficients started at the resonance centre).
    pub fn preset(name: &str) -> Result<Self, CliError> {
        let figure = |v_eta: f64, t_end: f64, sample_interval: f64, lock_window: f64| Self {
            body: None,
            k: 1,
            coefficients: CoefficientSource::Eq35,
            time_unit: TimeUnit::Years,
            initial: InitialState {
                t: 0.0,
                gamma: 0.1,
                v_gamma: 1000.0,
                eta: 0.1,
                v_eta,
            },
            t_end,
            tol: 1e-8,
            sample_interval,
            lock_window: Some(lock_window),
            output: OutputSpec::default(),
        };
        match name {
            "fig3" => Ok(figure(50.0, 100.0, 0.01, 10.0)),
            "fig4" => Ok(figure(5.0, 5.0e6, 10.0, 1.0e5)),
            "eq35" => Ok(Self {
                initial: InitialState::default(),
                ..figure(0.0, 1000.0, 1.0, 100.0)
            }),
            other => Err(CliError::Config(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|ext| ext == "json");
        let config: Self = if is_json {
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let inner = value.get("config").cloned().unwrap_or(value);
            serde_json::from_value(inner).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad("t_end must be finite and non-negative");
        }
        if self.output.stride == 0 {
            return bad("output.stride must be at least 1");
        }
        if !(self.sample_interval > 0.0) {
            return bad("sample_interval must be positive");
        }
        if let Some(w) = self.lock_window {
            if !(w > 0.0) {
                return bad("lock_window must be positive");
            }
        }
        if self.coefficients == CoefficientSource::Derived && self.body.is_none() {
            return bad("derived coefficients need a body");
        }
        if !self.initial.state().is_finite() {
            return bad("initial state must be finite");
        }
        Ok(())
    }

    pub fn lock_window(&self) -> f64 {
        self.lock_window.unwrap_or(self.t_end / 10.0)
    }

    /// Resolves the coefficient source into concrete coefficients.
    pub fn model(&self) -> Result<(ModelCoefficients, Option<BodyParameters>), CliError> {
        match self.coefficients {
            CoefficientSource::Eq35 => {
                if self.k != 1 {
                    return Err(CliError::Config("the eq35 coefficients belong to k = 1".into()));
                }
                Ok((ModelCoefficients::eq35().in_unit(self.time_unit), None))
            }
            CoefficientSource::Derived => {
                let name = self.body.as_deref().unwrap_or_default();
                let params = BodyParameters::load(name)?;
                let coeffs = ModelCoefficients::from_body(&params, self.k, self.time_unit)?;
                Ok((coeffs, Some(params)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for name in PRESETS {
            ScenarioConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(ScenarioConfig::preset("fig5").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let config = ScenarioConfig::preset("fig3").unwrap();
        let text = toml::to_string(&config).unwrap();
        let back: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn minimal_document() {
        let text = r#"
            coefficients = "eq35"
            t_end = 10.0
            [initial]
            gamma = 0.0
            v_gamma = 0.0
            eta = 0.0
            v_eta = 0.0
        "#;
        let config: ScenarioConfig = toml::from_str(text).unwrap();
        assert_eq!(config.k, 1);
        assert_eq!(config.output.stride, 1);
        assert_eq!(config.time_unit, TimeUnit::Years);
        config.validate().unwrap();
    }

    #[test]
    fn derived_needs_body() {
        let mut config = ScenarioConfig::preset("fig3").unwrap();
        config.coefficients = CoefficientSource::Derived;
        assert!(config.validate().is_err());
        config.body = Some("ganymede".into());
        config.validate().unwrap();
        let (coeffs, params) = config.model().unwrap();
        assert!(params.is_some());
        assert_eq!(coeffs.time_unit, TimeUnit::Years);
    }
}
