use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid eccentricity {0}: expected 0 <= e < 1")]
    Eccentricity(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("quadrature did not converge after {points} points (last change {change:e})")]
    Quadrature { points: usize, change: f64 },

    #[error("step size underflow at t = {t}: h = {h:e}, state = {state:?}")]
    StepSizeUnderflow { t: f64, h: f64, state: Vec<f64> },

    #[error("non-finite state at t = {t}: {state:?}")]
    NonFinite { t: f64, state: Vec<f64> },

    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),

    #[error("trajectory spans {span} but {needed} is required")]
    TrajectoryTooShort { span: f64, needed: f64 },

    #[error("no eccentricity in (0, 1) satisfies the existence condition for k = {k}")]
    Unsatisfiable { k: u32 },

    #[error("unknown body `{0}`")]
    UnknownBody(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::StepSizeUnderflow { .. }
                | Error::NonFinite { .. }
                | Error::TooManySteps(_)
        )
    }
}
