//! Dataset records, run configuration, and deterministic JSON output.

mod config;
pub mod json;
mod records;

pub use config::{RunConfig, SimulationConfig};
pub use records::{parse_dataset, parse_dataset_str, serialize_dataset, Candidate, PairRecord};
