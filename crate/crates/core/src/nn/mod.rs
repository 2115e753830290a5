//! The recurrent regression network: LSTM stack, dense head, RMSE loss and
//! Adam, trained with backpropagation through time.

mod lstm;
mod model;
mod optim;
mod params;
mod train;

use thiserror::Error;

use crate::tensor::ShapeError;

pub use lstm::{lstm_cell_forward, LstmState};
pub use model::{dropout_mask, forward_backward, model_forward, predict, Mode};
pub use optim::Adam;
pub use params::{init_params, Architecture, LstmLayerParams, ModelParams, Regularization, GATES};
pub use train::{train_epochs, TrainConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("missing parameter {0:?}")]
    MissingParam(String),
    #[error("parameter layout: {0}")]
    Layout(String),
    #[error("loss vectors: {0}")]
    Loss(String),
    #[error("no training samples")]
    EmptyData,
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
}

/// Root mean squared error and its gradient with respect to `pred`.
/// The gradient is defined as zero when the loss is exactly zero.
pub fn rmse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>), NnError> {
    if pred.len() != target.len() {
        return Err(NnError::Loss(format!(
            "{} predictions, {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(NnError::Loss("empty".into()));
    }
    let n = pred.len() as f64;
    let loss = (pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
        .sqrt();
    let grad = if loss == 0.0 {
        vec![0.0; pred.len()]
    } else {
        pred.iter()
            .zip(target)
            .map(|(p, t)| (p - t) / (n * loss))
            .collect()
    };
    Ok((loss, grad))
}
