//! Federated remaining-useful-life prediction for turbofan engines.

pub mod cmapss;
pub mod experiment;
pub mod features;
pub mod fed;
pub mod nn;
pub mod preprocess;
pub mod rng;
pub mod stats;
pub mod tensor;

pub use cmapss::{AgentId, TimeSeriesTable};
pub use tensor::Tensor;
