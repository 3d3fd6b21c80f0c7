//! Topology- and uncertainty-aware preference optimization at desk scale.
//!
//! Reasoning graphs are sanitized and scored structurally, re-elicited graph
//! samples give epistemic and aleatoric uncertainty, and both feed a shaped
//! reward and a per-pair weight in a DPO-style margin. A tabular policy
//! trainer, its closed-form Gibbs optimum, calibration metrics, and the
//! statistics used to evaluate runs round out the crate.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the data and command layers use.

pub mod calibration;
pub mod commands;
pub mod dataio;
pub mod error;
pub mod objective;
pub mod policy;
pub mod reward;
pub mod scalar;
pub mod stats;
pub mod topology;
pub mod uncertainty;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Graph = topology::ReasoningGraph<f64>;
pub type Node = topology::Node<f64>;
pub type Edge = topology::Edge<f64>;
pub type Policy = policy::TabularPolicy<f64>;
pub type Calibrators = reward::CalibratorParams<f64>;
pub type Signals = reward::SignalBundle<f64>;
pub type Objective = objective::ObjectiveParams<f64>;
pub type Pair = policy::PreparedPair<f64>;
