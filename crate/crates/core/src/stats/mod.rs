//! Regression metrics, Student-t tests and confidence intervals.

mod metrics;
mod student_t;
mod ttest;

use thiserror::Error;

pub use metrics::{compute_metrics, is_constant, mean, pearson, sample_std, MetricReport};
pub use student_t::{incomplete_beta, ln_gamma, StudentT};
pub use ttest::{
    compare_models, comparisons_csv, comparisons_text, confidence_interval, intervals_csv,
    intervals_text, reference_baselines, t_test_one_sample, Baseline, Comparison,
    ConfidenceInterval, NullHypothesis, TTestResult,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} samples, got {n}")]
    TooFewSamples { n: usize, needed: usize },
    #[error("sample has zero variance")]
    ZeroVariance,
    #[error("probability {0} outside (0, 1)")]
    BadProbability(f64),
    #[error("sample contains non-finite values")]
    NonFinite,
}
