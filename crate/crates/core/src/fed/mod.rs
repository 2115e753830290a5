//! Federated averaging over in-process clients that exchange only serialized weights.

mod wire;

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::cmapss::AgentId;
use crate::features::SequenceBatch;
use crate::nn::{predict, rmse_loss, train_epochs, ModelParams, NnError, TrainConfig};
use crate::rng::{derive_seed, stream};

pub use wire::{deserialize_params, params_to_json, serialize_params, WireError, MAGIC, VERSION};

/// Samples evaluated per forward pass when scoring validation data.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Error)]
pub enum FedError {
    #[error("no models to aggregate")]
    NoModels,
    #[error("{models} models but {weights} weights")]
    WeightCount { models: usize, weights: usize },
    #[error("weight {index} is {weight}; weights must be positive and finite")]
    BadWeight { index: usize, weight: f64 },
    #[error("model {index} does not match the layout of model 0")]
    Layout { index: usize },
    #[error("no clients registered")]
    NoClients,
    #[error("invalid round configuration: {0}")]
    BadConfig(String),
    #[error("client {agent}, round {round}: {source}")]
    Client {
        agent: AgentId,
        round: usize,
        source: NnError,
    },
    #[error("client {agent}: {source}")]
    Evaluate { agent: AgentId, source: NnError },
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Weighted elementwise mean: each tensor becomes `sum_k (w_k / sum w) * tensor_k`.
pub fn fed_avg(models: &[ModelParams], weights: &[f64]) -> Result<ModelParams, FedError> {
    let first = models.first().ok_or(FedError::NoModels)?;
    if models.len() != weights.len() {
        return Err(FedError::WeightCount {
            models: models.len(),
            weights: weights.len(),
        });
    }
    for (index, &weight) in weights.iter().enumerate() {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(FedError::BadWeight { index, weight });
        }
    }
    if let Some(index) = models.iter().position(|m| !m.same_layout(first)) {
        return Err(FedError::Layout { index });
    }
    let total: f64 = weights.iter().sum();
    let mut out = first.zeros_like();
    for (model, &w) in models.iter().zip(weights) {
        let share = w / total;
        for ((_, acc), (_, t)) in out.iter_mut().zip(model.iter()) {
            acc.scaled_add(share, t).expect("layouts checked");
        }
    }
    Ok(out)
}

/// One federation participant. Its data never leaves this struct.
#[derive(Debug, Clone)]
pub struct ClientNode {
    pub agent: AgentId,
    pub train_data: SequenceBatch,
    pub validation_data: SequenceBatch,
    pub model: ModelParams,
    pub seed: u64,
}

impl ClientNode {
    /// Training windows; the client's aggregation weight.
    pub fn sample_count(&self) -> usize {
        self.train_data.len()
    }
}

/// Copies `global` into every client.
pub fn broadcast(global: &ModelParams, clients: &mut [ClientNode]) -> Result<(), FedError> {
    if let Some(index) = clients.iter().position(|c| !c.model.same_layout(global)) {
        return Err(FedError::Layout { index });
    }
    for c in clients {
        c.model = global.clone();
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStop {
    /// Minimum improvement in global validation RMSE, in cycles.
    pub epsilon: f64,
    /// Rounds over which the improvement is measured.
    pub window: usize,
}

impl Default for EarlyStop {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            window: 5,
        }
    }
}

impl EarlyStop {
    /// True when the best of the last `window` values improves on the value
    /// just before them by less than `epsilon`.
    pub fn should_stop(&self, history: &[f64]) -> bool {
        if self.window == 0 || history.len() <= self.window {
            return false;
        }
        let split = history.len() - self.window;
        let best = history[split..]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        history[split - 1] - best < self.epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundConfig {
    pub rounds: usize,
    /// Epochs each client trains per round. Zero leaves models untouched.
    pub local_epochs: usize,
    pub train: TrainConfig,
    pub early_stop: Option<EarlyStop>,
}

impl Default for RoundConfig {
    fn default() -> Self {
        Self {
            rounds: 10,
            local_epochs: 1,
            train: TrainConfig::default(),
            early_stop: Some(EarlyStop::default()),
        }
    }
}

impl RoundConfig {
    pub fn validate(&self) -> Result<(), FedError> {
        if self.rounds == 0 {
            return Err(FedError::BadConfig("rounds must be at least 1".into()));
        }
        self.train
            .validate()
            .map_err(|e| FedError::BadConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientRound {
    pub agent: AgentId,
    pub samples: usize,
    /// Last local epoch's training RMSE; `None` when no epoch ran.
    pub train_rmse: Option<f64>,
    /// The aggregated model's RMSE on this client's validation windows.
    pub validation_rmse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RoundReport {
    /// 1-based.
    pub round: usize,
    pub clients: Vec<ClientRound>,
    /// Sample-weighted mean of the clients' validation RMSE.
    pub global_validation_rmse: Option<f64>,
    pub wall_time: Duration,
}

impl PartialEq for RoundReport {
    /// Timing is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.round == other.round
            && self.clients == other.clients
            && self.global_validation_rmse == other.global_validation_rmse
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Coordinator to client.
    Download,
    /// Client to coordinator.
    Upload,
}

/// One object crossing the client boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditEvent {
    pub round: usize,
    pub agent: AgentId,
    pub direction: Direction,
    /// Serialized model weights; nothing else is ever exchanged.
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct FederationOutcome {
    pub global: ModelParams,
    pub reports: Vec<RoundReport>,
    /// Each client's model after its last local training, before aggregation.
    pub local_models: Vec<(AgentId, ModelParams)>,
    /// Clients holding the final global model.
    pub clients: Vec<ClientNode>,
}

/// Training seed of a client in a round.
pub fn round_seed(client_seed: u64, round: usize) -> u64 {
    derive_seed(client_seed, &[stream::ROUND, round as u64])
}

/// RMSE of `params` on a batch; `None` for an empty batch.
pub fn evaluate_rmse(params: &ModelParams, data: &SequenceBatch) -> Result<Option<f64>, NnError> {
    if data.is_empty() {
        return Ok(None);
    }
    let pred = predict(&data.inputs, params, EVAL_CHUNK)?;
    Ok(Some(rmse_loss(&pred, &data.targets)?.0))
}

/// Rounds of local training and weighted averaging starting from `initial`.
/// Models cross the client boundary only as serialized bytes, each reported to `audit`.
pub fn run_federation(
    mut clients: Vec<ClientNode>,
    initial: &ModelParams,
    cfg: &RoundConfig,
    audit: &mut dyn FnMut(&AuditEvent),
) -> Result<FederationOutcome, FedError> {
    cfg.validate()?;
    if clients.is_empty() {
        return Err(FedError::NoClients);
    }
    let weights: Vec<f64> = clients.iter().map(|c| c.sample_count() as f64).collect();
    let mut global = initial.clone();
    let mut reports = Vec::new();
    let mut history = Vec::new();
    let mut local_models = Vec::new();
    for round in 1..=cfg.rounds {
        let started = Instant::now();
        let down = serialize_params(&global)?;
        let mut uploads = Vec::with_capacity(clients.len());
        let mut rows = Vec::with_capacity(clients.len());
        for client in &mut clients {
            audit(&AuditEvent {
                round,
                agent: client.agent,
                direction: Direction::Download,
                payload: down.clone(),
            });
            client.model = deserialize_params(&down)?;
            let tc = TrainConfig {
                epochs: cfg.local_epochs,
                seed: round_seed(client.seed, round),
                ..cfg.train
            };
            let wrap = |source| FedError::Client {
                agent: client.agent,
                round,
                source,
            };
            let (model, hist) =
                train_epochs(&client.train_data, &client.model, &tc).map_err(wrap)?;
            client.model = model;
            let up = serialize_params(&client.model)?;
            audit(&AuditEvent {
                round,
                agent: client.agent,
                direction: Direction::Upload,
                payload: up.clone(),
            });
            uploads.push(deserialize_params(&up)?);
            rows.push(ClientRound {
                agent: client.agent,
                samples: client.sample_count(),
                train_rmse: hist.last().copied(),
                validation_rmse: None,
            });
        }
        global = fed_avg(&uploads, &weights)?;
        local_models = clients.iter().map(|c| (c.agent, c.model.clone())).collect();

        let (mut num, mut den) = (0.0, 0.0);
        for (row, client) in rows.iter_mut().zip(&clients) {
            row.validation_rmse =
                evaluate_rmse(&global, &client.validation_data).map_err(|source| {
                    FedError::Evaluate {
                        agent: client.agent,
                        source,
                    }
                })?;
            if let Some(v) = row.validation_rmse {
                num += row.samples as f64 * v;
                den += row.samples as f64;
            }
        }
        let global_rmse = (den > 0.0).then(|| num / den);
        reports.push(RoundReport {
            round,
            clients: rows,
            global_validation_rmse: global_rmse,
            wall_time: started.elapsed(),
        });
        if let (Some(v), Some(stop)) = (global_rmse, cfg.early_stop) {
            history.push(v);
            if stop.should_stop(&history) {
                break;
            }
        }
    }
    broadcast(&global, &mut clients)?;
    Ok(FederationOutcome {
        global,
        reports,
        local_models,
        clients,
    })
}
