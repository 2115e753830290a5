//! Median filtering with correlation-driven kernel selection, random tail
//! pruning, z-score scaling and correlation matrices.

mod correlation;
mod filter;
mod prune;
mod scaler;

use thiserror::Error;

pub use correlation::{correlation_matrix, CorrelationMatrix};
pub use filter::{
    best_unit_kernel, candidate_kernels, kernel_weight, median_filter, round_to_odd,
    select_kernels, FilterPlan,
};
pub use prune::{prune_units, PruneConfig};
pub use scaler::{apply_scaler, fit_all, fit_scaler, ScalerParams, MIN_STD};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreprocessError {
    #[error("median kernel must be odd and positive, got {0}")]
    BadKernel(usize),
    #[error("signal index {index} out of range (have {count})")]
    SignalOutOfRange { index: usize, count: usize },
    #[error("table has no RUL labels")]
    Unlabeled,
    #[error("table has too few rows")]
    EmptyTable,
    #[error("feature {index}: scaler fitted on {expected:?}, table has {found:?}")]
    FeatureMismatch {
        index: usize,
        expected: String,
        found: Option<String>,
    },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}
