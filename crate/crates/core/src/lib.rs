//! Two-layer (crust over a fluid-coupled core) spin-orbit resonance model.
//!
//! Everything numerical is generic over [`Scalar`]; the aliases below fix the
//! scalar to `f64`, which is what the command-line tool uses.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bodies;
pub mod dynamics;
pub mod error;
pub mod kepler;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type BodyParameters = bodies::BodyParameters<f64>;
pub type CouplingSet = bodies::CouplingSet<f64>;
pub type ExpansionTable = kepler::ExpansionTable<f64>;
pub type ModelCoefficients = dynamics::ModelCoefficients<f64>;
pub type UnaveragedCoefficients = dynamics::UnaveragedCoefficients<f64>;
pub type SpinState = dynamics::SpinState<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type CaptureVerdict = analysis::CaptureVerdict<f64>;
pub type CascadeEpisode = analysis::CascadeEpisode<f64>;
