//! End-to-end pipeline: split, filter, prune, engineer, scale, window, train, score.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::cmapss::{
    label_test_rul, label_train_rul, parse_data_file, parse_rul_file, AgentId, DataFormat,
    IngestError, TimeSeriesTable, SETTING_COUNT, SIGNAL_COUNT,
};
use crate::features::{
    build_windows, engineer, FeatureConfig, FeatureError, SequenceBatch, WindowMode,
};
use crate::fed::{
    run_federation, AuditEvent, ClientNode, FedError, FederationOutcome, RoundConfig,
};
use crate::nn::{init_params, predict, Architecture, ModelParams, NnError};
use crate::preprocess::{
    apply_scaler, fit_all, prune_units, select_kernels, FilterPlan, PreprocessError, PruneConfig,
    ScalerParams,
};
use crate::rng::{derive_seed, seeded, stream};
use crate::stats::{compute_metrics, MetricReport, StatsError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Ingest { path: PathBuf, source: IngestError },
    #[error("{agent}: {source}")]
    Preprocess {
        agent: AgentId,
        source: PreprocessError,
    },
    #[error("{agent}: {source}")]
    Feature {
        agent: AgentId,
        source: FeatureError,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Fed(#[from] FedError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{agent}: no training units left after the validation split")]
    NoTrainingUnits { agent: AgentId },
    #[error("agent {0} was not loaded")]
    MissingAgent(AgentId),
    #[error("no agents to train on")]
    NoAgents,
}

/// Labeled train and test tables of one agent.
#[derive(Debug, Clone)]
pub struct AgentData {
    pub agent: AgentId,
    pub train: TimeSeriesTable,
    pub test: TimeSeriesTable,
}

/// Finds `<stem>_FD00x.txt`, falling back to `.csv`.
pub fn agent_file(dir: &Path, stem: &str, agent: AgentId) -> PathBuf {
    let txt = dir.join(format!("{stem}_{}.txt", agent.name()));
    if txt.exists() {
        return txt;
    }
    let csv = dir.join(format!("{stem}_{}.csv", agent.name()));
    if csv.exists() {
        csv
    } else {
        txt
    }
}

fn read(path: &Path) -> Result<Vec<u8>, ExperimentError> {
    std::fs::read(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads and labels `train_`, `test_` and `RUL_` files of one agent from `dir`.
pub fn load_agent(dir: &Path, agent: AgentId) -> Result<AgentData, ExperimentError> {
    let ingest = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ExperimentError::Ingest { path, source }
    };
    let train_path = agent_file(dir, "train", agent);
    let test_path = agent_file(dir, "test", agent);
    let rul_path = agent_file(dir, "RUL", agent);
    let train = parse_data_file(&read(&train_path)?, DataFormat::Auto, agent)
        .map_err(ingest(&train_path))?;
    let test =
        parse_data_file(&read(&test_path)?, DataFormat::Auto, agent).map_err(ingest(&test_path))?;
    let ruls = parse_rul_file(&read(&rul_path)?).map_err(ingest(&rul_path))?;
    Ok(AgentData {
        agent,
        train: label_train_rul(&train),
        test: label_test_rul(&test, &ruls).map_err(ingest(&rul_path))?,
    })
}

/// Where the median-filter kernels come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterSource {
    /// Selected per agent on its training split.
    Auto,
    Explicit(FilterPlan),
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub features: FeatureConfig,
    pub prune: PruneConfig,
    pub filter: FilterSource,
    /// Signals considered by automatic kernel selection.
    pub filter_signals: Vec<usize>,
    /// Share of each agent's training units held out for validation.
    pub validation_fraction: f64,
    pub lstm_layers: usize,
    pub dense_layers: usize,
    pub units: usize,
    pub rounds: RoundConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            features: FeatureConfig::default(),
            prune: PruneConfig::default(),
            filter: FilterSource::Auto,
            filter_signals: (SETTING_COUNT..SIGNAL_COUNT).collect(),
            validation_fraction: 0.2,
            lstm_layers: 4,
            dense_layers: 4,
            units: 64,
            rounds: RoundConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_features: self.features.feature_count(),
            lstm_layers: self.lstm_layers,
            dense_layers: self.dense_layers,
            units: self.units,
        }
    }
}

/// Splits unit ids into (train, validation) by a seeded shuffle. At least one
/// unit stays in training; with two or more units at least one is held out
/// whenever `fraction > 0`.
pub fn split_units(ids: &[u32], fraction: f64, seed: u64) -> (Vec<u32>, Vec<u32>) {
    let n = ids.len();
    let n_val = if n < 2 || fraction <= 0.0 {
        0
    } else {
        ((fraction * n as f64).round() as usize).clamp(1, n - 1)
    };
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut seeded(seed));
    let mut val = shuffled[..n_val].to_vec();
    let mut train = shuffled[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    (train, val)
}

/// Windows and fitted preprocessing of one agent.
#[derive(Debug, Clone)]
pub struct PreparedAgent {
    pub agent: AgentId,
    pub train: SequenceBatch,
    pub validation: SequenceBatch,
    pub test: SequenceBatch,
    pub train_units: Vec<u32>,
    pub validation_units: Vec<u32>,
    pub filter: FilterPlan,
    pub scaler: ScalerParams,
}

pub fn prepare_agent(
    data: &AgentData,
    cfg: &PipelineConfig,
) -> Result<PreparedAgent, ExperimentError> {
    let agent = data.agent;
    let pre = |source| ExperimentError::Preprocess { agent, source };
    let feat = |source| ExperimentError::Feature { agent, source };
    let split_seed = derive_seed(cfg.seed, &[stream::VALIDATION_SPLIT, agent.index() as u64]);
    let (train_units, validation_units) =
        split_units(&data.train.unit_ids(), cfg.validation_fraction, split_seed);
    if train_units.is_empty() {
        return Err(ExperimentError::NoTrainingUnits { agent });
    }
    let train = data.train.select_units(&train_units);
    let validation = data.train.select_units(&validation_units);

    let filter = match &cfg.filter {
        FilterSource::Auto => select_kernels(&train, &cfg.filter_signals).map_err(pre)?,
        FilterSource::Explicit(plan) => plan.clone(),
        FilterSource::Off => FilterPlan::off(),
    };
    let prune = PruneConfig {
        seed: derive_seed(cfg.prune.seed, &[agent.index() as u64]),
        ..cfg.prune
    };
    let train = prune_units(&filter.apply(&train), &prune).map_err(pre)?;
    let train = engineer(&train, &cfg.features).map_err(feat)?;
    let validation = engineer(&filter.apply(&validation), &cfg.features).map_err(feat)?;
    let test = engineer(&filter.apply(&data.test), &cfg.features).map_err(feat)?;

    let scaler = fit_all(&train).map_err(pre)?;
    let scale = |t: &TimeSeriesTable| apply_scaler(t, &scaler).map_err(pre);
    let l = cfg.features.sequence_length;
    Ok(PreparedAgent {
        agent,
        train: build_windows(&scale(&train)?, l, WindowMode::EveryCycle).map_err(feat)?,
        validation: build_windows(&scale(&validation)?, l, WindowMode::EveryCycle).map_err(feat)?,
        test: build_windows(&scale(&test)?, l, WindowMode::LastCycle).map_err(feat)?,
        train_units,
        validation_units,
        filter,
        scaler,
    })
}

/// Initial global model for a configuration.
pub fn initial_model(cfg: &PipelineConfig) -> Result<ModelParams, NnError> {
    init_params(
        &cfg.architecture(),
        &cfg.rounds.train.regularization(),
        derive_seed(cfg.seed, &[stream::MODEL_INIT]),
    )
}

pub fn client_seed(base: u64, agent: AgentId) -> u64 {
    derive_seed(base, &[stream::CLIENT, agent.index() as u64])
}

/// One line of the results table: an agent's local model, or the aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    /// Eval-mode RMSE on the training windows.
    pub train_rmse: Option<f64>,
    pub validation_rmse: Option<f64>,
    pub test: Option<MetricReport>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub outcome: FederationOutcome,
    pub summary: Vec<SummaryRow>,
}

/// Eval-mode metrics of `params` on a batch; `None` when the batch is empty.
pub fn evaluate(
    params: &ModelParams,
    data: &SequenceBatch,
) -> Result<Option<MetricReport>, ExperimentError> {
    if data.is_empty() {
        return Ok(None);
    }
    let pred = predict(&data.inputs, params, 256)?;
    Ok(Some(compute_metrics(&pred, &data.targets)?))
}

/// Federated training over the prepared agents (one agent gives plain local training).
pub fn run_experiment(
    agents: &[PreparedAgent],
    cfg: &PipelineConfig,
    audit: &mut dyn FnMut(&AuditEvent),
) -> Result<ExperimentResult, ExperimentError> {
    if agents.is_empty() {
        return Err(ExperimentError::NoAgents);
    }
    let init = initial_model(cfg)?;
    let clients = agents
        .iter()
        .map(|a| ClientNode {
            agent: a.agent,
            train_data: a.train.clone(),
            validation_data: a.validation.clone(),
            model: init.clone(),
            seed: client_seed(cfg.seed, a.agent),
        })
        .collect();
    let outcome = run_federation(clients, &init, &cfg.rounds, audit)?;
    let summary = summarize(agents, &outcome)?;
    Ok(ExperimentResult { outcome, summary })
}

/// Per-agent rows score each client's last local model on its own splits. The
/// aggregate row scores the global model on all agents' windows pooled, and
/// reports the final round's sample-weighted validation RMSE.
pub fn summarize(
    agents: &[PreparedAgent],
    outcome: &FederationOutcome,
) -> Result<Vec<SummaryRow>, ExperimentError> {
    let mut rows = Vec::with_capacity(agents.len() + 1);
    for a in agents {
        let local = outcome
            .local_models
            .iter()
            .find(|(id, _)| *id == a.agent)
            .map(|(_, m)| m)
            .unwrap_or(&outcome.global);
        rows.push(SummaryRow {
            name: a.agent.name().to_string(),
            train_rmse: evaluate(local, &a.train)?.map(|m| m.rmse),
            validation_rmse: evaluate(local, &a.validation)?.map(|m| m.rmse),
            test: evaluate(local, &a.test)?,
        });
    }
    let pool = |pick: fn(&PreparedAgent) -> &SequenceBatch| {
        SequenceBatch::concat(&agents.iter().map(pick).collect::<Vec<_>>())
            .expect("same window shape")
    };
    rows.push(SummaryRow {
        name: "Aggregated".to_string(),
        train_rmse: evaluate(&outcome.global, &pool(|a| &a.train))?.map(|m| m.rmse),
        validation_rmse: outcome
            .reports
            .last()
            .and_then(|r| r.global_validation_rmse),
        test: evaluate(&outcome.global, &pool(|a| &a.test))?,
    });
    Ok(rows)
}

/// RMSE on the test windows of always predicting the mean training target.
pub fn constant_mean_rmse(train: &SequenceBatch, test: &SequenceBatch) -> Option<f64> {
    if train.is_empty() || test.is_empty() {
        return None;
    }
    let mean = train.targets.iter().sum::<f64>() / train.len() as f64;
    let mse = test.targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / test.len() as f64;
    Some(mse.sqrt())
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v:?}"))
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out =
        String::from("agent,train_rmse,validation_rmse,test_rmse,test_mae,test_r2,test_n\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.name,
            opt(r.train_rmse),
            opt(r.validation_rmse),
            opt(r.test.as_ref().map(|m| m.rmse)),
            opt(r.test.as_ref().map(|m| m.mae)),
            opt(r.test.as_ref().and_then(|m| m.r_squared)),
            r.test.as_ref().map_or(0, |m| m.n)
        );
    }
    out
}

pub fn summary_text(rows: &[SummaryRow]) -> String {
    let cell = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    let mut out = format!(
        "{:<12} {:>12} {:>16} {:>10} {:>10}\n",
        "Agent", "Train RMSE", "Validation RMSE", "Test RMSE", "Test MAE"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<12} {:>12} {:>16} {:>10} {:>10}",
            r.name,
            cell(r.train_rmse),
            cell(r.validation_rmse),
            cell(r.test.as_ref().map(|m| m.rmse)),
            cell(r.test.as_ref().map(|m| m.mae))
        );
    }
    out
}

/// One csv line per client per round, plus the global validation RMSE. No timing.
pub fn rounds_csv(outcome: &FederationOutcome) -> String {
    let mut out =
        String::from("round,agent,samples,train_rmse,validation_rmse,global_validation_rmse\n");
    for r in &outcome.reports {
        for c in &r.clients {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.round,
                c.agent,
                c.samples,
                opt(c.train_rmse),
                opt(c.validation_rmse),
                opt(r.global_validation_rmse)
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmapss::synthetic::{generate, FleetSpec};
    use crate::fed::serialize_params;
    use crate::nn::TrainConfig;

    pub(crate) fn synthetic_agent(agent: AgentId, units: usize, seed: u64) -> AgentData {
        let fleet = generate(&FleetSpec::new(agent, units, units, seed));
        AgentData {
            agent,
            train: label_train_rul(&fleet.train),
            test: label_test_rul(&fleet.test, &fleet.test_rul).unwrap(),
        }
    }

    fn small_config() -> PipelineConfig {
        PipelineConfig {
            seed: 3,
            features: FeatureConfig {
                sequence_length: 3,
                ..FeatureConfig::default()
            },
            lstm_layers: 1,
            dense_layers: 1,
            units: 8,
            rounds: RoundConfig {
                rounds: 2,
                local_epochs: 1,
                train: TrainConfig {
                    batch_size: 64,
                    ..TrainConfig::default()
                },
                early_stop: None,
            },
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn split_is_seeded_and_disjoint() {
        let ids: Vec<u32> = (1..=10).collect();
        let (t, v) = split_units(&ids, 0.2, 5);
        assert_eq!((t.len(), v.len()), (8, 2));
        assert!(v.iter().all(|u| !t.contains(u)));
        assert_eq!(split_units(&ids, 0.2, 5), (t, v));
        assert_eq!(split_units(&[4], 0.2, 1), (vec![4], vec![]));
        assert_eq!(split_units(&[1, 2], 0.2, 1).1.len(), 1);
        assert_eq!(split_units(&ids, 0.0, 1).1.len(), 0);
    }

    #[test]
    fn prepared_shapes() {
        let data = synthetic_agent(AgentId::Fd001, 10, 1);
        let cfg = small_config();
        let p = prepare_agent(&data, &cfg).unwrap();
        assert_eq!(p.validation_units.len(), 2);
        assert_eq!(p.test.len(), 10);
        assert_eq!(p.train.feature_count(), 45);
        assert_eq!(p.train.sequence_length(), 3);
        let val_rows: usize = data.train.select_units(&p.validation_units).len();
        assert_eq!(p.validation.len(), val_rows);
        // pruning only shortens training units
        let train_rows = data.train.select_units(&p.train_units).len();
        assert!(p.train.len() <= train_rows);
        let test_targets: Vec<f64> = data
            .test
            .units()
            .iter()
            .map(|s| f64::from(data.test.rows()[s.rows.end - 1].rul.unwrap()))
            .collect();
        assert_eq!(p.test.targets, test_targets);
    }

    #[test]
    fn federated_run_is_reproducible() {
        let cfg = small_config();
        let agents: Vec<PreparedAgent> = [AgentId::Fd001, AgentId::Fd003]
            .iter()
            .map(|&a| prepare_agent(&synthetic_agent(a, 6, 2), &cfg).unwrap())
            .collect();
        let a = run_experiment(&agents, &cfg, &mut |_| {}).unwrap();
        let b = run_experiment(&agents, &cfg, &mut |_| {}).unwrap();
        assert_eq!(
            serialize_params(&a.outcome.global).unwrap(),
            serialize_params(&b.outcome.global).unwrap()
        );
        assert_eq!(summary_csv(&a.summary), summary_csv(&b.summary));
        assert_eq!(rounds_csv(&a.outcome), rounds_csv(&b.outcome));
        assert_eq!(a.summary.len(), 3);
        assert_eq!(a.summary[2].name, "Aggregated");
        assert_eq!(rounds_csv(&a.outcome).lines().count(), 1 + 2 * 2);
    }

    #[test]
    fn local_mode_is_single_client_federation() {
        let cfg = small_config();
        let agent = prepare_agent(&synthetic_agent(AgentId::Fd002, 6, 2), &cfg).unwrap();
        let r = run_experiment(std::slice::from_ref(&agent), &cfg, &mut |_| {}).unwrap();
        assert_eq!(r.outcome.global, r.outcome.local_models[0].1);
        let (agent_row, agg) = (&r.summary[0], &r.summary[1]);
        assert_eq!(agent_row.train_rmse, agg.train_rmse);
        assert_eq!(agent_row.test, agg.test);
    }

    #[test]
    fn constant_baseline() {
        let cfg = small_config();
        let p = prepare_agent(&synthetic_agent(AgentId::Fd001, 6, 2), &cfg).unwrap();
        let mean = p.train.targets.iter().sum::<f64>() / p.train.len() as f64;
        let want = (p
            .test
            .targets
            .iter()
            .map(|t| (t - mean).powi(2))
            .sum::<f64>()
            / p.test.len() as f64)
            .sqrt();
        assert_eq!(constant_mean_rmse(&p.train, &p.test), Some(want));
    }

    #[test]
    fn missing_files_name_the_path() {
        let err = load_agent(Path::new("/nonexistent-dir"), AgentId::Fd001).unwrap_err();
        assert!(
            err.to_string().contains("/nonexistent-dir/train_FD001.txt"),
            "{err}"
        );
    }
}
