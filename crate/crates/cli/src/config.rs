//! Flat `key = value` experiment configuration. `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fedrul::cmapss::{signal_index, signal_labels};
use fedrul::experiment::{FilterSource, PipelineConfig};
use fedrul::fed::EarlyStop;
use fedrul::preprocess::FilterPlan;
use fedrul::AgentId;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Directory holding `train_FD00x`, `test_FD00x` and `RUL_FD00x` files.
    pub data_dir: PathBuf,
    /// Per-agent directory overrides (`data.FD002 = ...`).
    pub agent_dirs: BTreeMap<AgentId, PathBuf>,
    /// Clients registered for federated training.
    pub agents: Vec<AgentId>,
    pub output_dir: PathBuf,
    pub pipeline: PipelineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data/CMAPSS"),
            agent_dirs: BTreeMap::new(),
            agents: AgentId::ALL.to_vec(),
            output_dir: PathBuf::from("out"),
            pipeline: PipelineConfig::default(),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| usage(format!("config key `{key}`: cannot parse `{value}`")))
}

fn parse_list<T>(
    value: &str,
    mut item: impl FnMut(&str) -> Result<T, CliError>,
) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(&mut item)
        .collect()
}

fn parse_signal(key: &str, label: &str) -> Result<usize, CliError> {
    signal_index(label)
        .ok_or_else(|| usage(format!("config key `{key}`: unknown signal `{label}`")))
}

fn parse_agent(key: &str, s: &str) -> Result<AgentId, CliError> {
    s.parse()
        .map_err(|_| usage(format!("config key `{key}`: unknown agent `{s}`")))
}

fn signal_list(signals: &[usize]) -> String {
    let labels = signal_labels();
    signals
        .iter()
        .map(|&s| labels[s].as_str())
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                usage(format!(
                    "config line {}: expected `key = value`",
                    lineno + 1
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), lineno + 1).is_some() {
                return Err(usage(format!("config key `{key}` given twice")));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let p = &mut self.pipeline;
        let train = &mut p.rounds.train;
        match key {
            "data_dir" => self.data_dir = PathBuf::from(value),
            "agents" => self.agents = parse_list(value, |s| parse_agent(key, s))?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => {
                p.seed = parse_value(key, value)?;
                train.seed = p.seed;
            }
            "sequence_length" => p.features.sequence_length = parse_value(key, value)?,
            "cumsum_signals" => {
                p.features.cumsum_signals = parse_list(value, |s| parse_signal(key, s))?
            }
            "derivative_signals" => {
                p.features.derivative_signals = parse_list(value, |s| parse_signal(key, s))?
            }
            "dt" => p.features.dt = parse_value(key, value)?,
            "prune_chance" => p.prune.prune_chance = parse_value(key, value)?,
            "prune_p" => p.prune.p = parse_value(key, value)?,
            "prune_pplus" => p.prune.pplus = parse_value(key, value)?,
            "prune_heavy_fraction" => p.prune.heavy_fraction = parse_value(key, value)?,
            "prune_seed" => p.prune.seed = parse_value(key, value)?,
            "filter" => {
                p.filter = match value {
                    "auto" => FilterSource::Auto,
                    "off" => FilterSource::Off,
                    _ => {
                        let kernels = parse_list(value, |item| {
                            let (sig, k) = item.split_once(':').ok_or_else(|| {
                                usage(format!(
                                    "config key `filter`: expected SIGNAL:KERNEL, got `{item}`"
                                ))
                            })?;
                            Ok((
                                parse_signal(key, sig.trim())?,
                                parse_value::<usize>(key, k.trim())?,
                            ))
                        })?;
                        FilterSource::Explicit(
                            FilterPlan::from_kernels(kernels)
                                .map_err(|e| usage(format!("config key `filter`: {e}")))?,
                        )
                    }
                }
            }
            "filter_signals" => p.filter_signals = parse_list(value, |s| parse_signal(key, s))?,
            "validation_fraction" => p.validation_fraction = parse_value(key, value)?,
            "lstm_layers" => p.lstm_layers = parse_value(key, value)?,
            "dense_layers" => p.dense_layers = parse_value(key, value)?,
            "units" => p.units = parse_value(key, value)?,
            "learning_rate" => train.learning_rate = parse_value(key, value)?,
            "batch_size" => train.batch_size = parse_value(key, value)?,
            "noise_sigma" => train.gaussian_noise_sigma = parse_value(key, value)?,
            "dropout" => train.dropout = parse_value(key, value)?,
            "recurrent_dropout" => train.recurrent_dropout = parse_value(key, value)?,
            "rounds" => p.rounds.rounds = parse_value(key, value)?,
            "local_epochs" => p.rounds.local_epochs = parse_value(key, value)?,
            "early_stop_epsilon" => {
                let epsilon = parse_value(key, value)?;
                let window = p
                    .rounds
                    .early_stop
                    .map_or(EarlyStop::default().window, |e| e.window);
                p.rounds.early_stop = Some(EarlyStop { epsilon, window });
            }
            "early_stop_window" => {
                let window: usize = parse_value(key, value)?;
                p.rounds.early_stop = if window == 0 {
                    None
                } else {
                    let epsilon = p
                        .rounds
                        .early_stop
                        .map_or(EarlyStop::default().epsilon, |e| e.epsilon);
                    Some(EarlyStop { epsilon, window })
                };
            }
            _ => match key.strip_prefix("data.") {
                Some(agent) => {
                    self.agent_dirs
                        .insert(parse_agent(key, agent)?, PathBuf::from(value));
                }
                None => return Err(usage(format!("unknown config key `{key}`"))),
            },
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.pipeline;
        if self.agents.is_empty() {
            return Err(usage("config key `agents`: at least one agent is required"));
        }
        p.features
            .validate()
            .map_err(|e| usage(format!("feature config: {e}")))?;
        p.prune
            .validate()
            .map_err(|e| usage(format!("prune config: {e}")))?;
        p.rounds
            .validate()
            .map_err(|e| usage(format!("round config: {e}")))?;
        if !(0.0..1.0).contains(&p.validation_fraction) {
            return Err(usage("config key `validation_fraction` must lie in [0, 1)"));
        }
        if p.units == 0 || p.lstm_layers == 0 {
            return Err(usage(
                "config keys `units` and `lstm_layers` must be positive",
            ));
        }
        Ok(())
    }

    pub fn agent_dir(&self, agent: AgentId) -> &Path {
        self.agent_dirs.get(&agent).unwrap_or(&self.data_dir)
    }

    /// Every key with its effective value, in a fixed order. Parses back to `self`.
    pub fn render(&self) -> String {
        let p = &self.pipeline;
        let t = &p.rounds.train;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("seed", p.seed.to_string());
        kv("data_dir", self.data_dir.display().to_string());
        for (agent, dir) in &self.agent_dirs {
            kv(&format!("data.{agent}"), dir.display().to_string());
        }
        kv(
            "agents",
            self.agents
                .iter()
                .map(|a| a.name())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("output_dir", self.output_dir.display().to_string());
        kv("sequence_length", p.features.sequence_length.to_string());
        kv("cumsum_signals", signal_list(&p.features.cumsum_signals));
        kv(
            "derivative_signals",
            signal_list(&p.features.derivative_signals),
        );
        kv("dt", p.features.dt.to_string());
        kv("prune_chance", format!("{:?}", p.prune.prune_chance));
        kv("prune_p", format!("{:?}", p.prune.p));
        kv("prune_pplus", format!("{:?}", p.prune.pplus));
        kv(
            "prune_heavy_fraction",
            format!("{:?}", p.prune.heavy_fraction),
        );
        kv("prune_seed", p.prune.seed.to_string());
        kv(
            "filter",
            match &p.filter {
                FilterSource::Auto => "auto".into(),
                FilterSource::Off => "off".into(),
                FilterSource::Explicit(plan) => {
                    let labels = signal_labels();
                    let items: Vec<String> = plan
                        .iter()
                        .map(|(s, k)| format!("{}:{k}", labels[s]))
                        .collect();
                    if items.is_empty() {
                        "off".into()
                    } else {
                        items.join(",")
                    }
                }
            },
        );
        kv("filter_signals", signal_list(&p.filter_signals));
        kv(
            "validation_fraction",
            format!("{:?}", p.validation_fraction),
        );
        kv("lstm_layers", p.lstm_layers.to_string());
        kv("dense_layers", p.dense_layers.to_string());
        kv("units", p.units.to_string());
        kv("learning_rate", format!("{:?}", t.learning_rate));
        kv("batch_size", t.batch_size.to_string());
        kv("noise_sigma", format!("{:?}", t.gaussian_noise_sigma));
        kv("dropout", format!("{:?}", t.dropout));
        kv("recurrent_dropout", format!("{:?}", t.recurrent_dropout));
        kv("rounds", p.rounds.rounds.to_string());
        kv("local_epochs", p.rounds.local_epochs.to_string());
        match p.rounds.early_stop {
            Some(e) => {
                kv("early_stop_epsilon", format!("{:?}", e.epsilon));
                kv("early_stop_window", e.window.to_string());
            }
            None => kv("early_stop_window", "0".into()),
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_round_trips() {
        let mut cfg = ExperimentConfig::parse(
            "# tiny run\nseed = 9\nagents = FD001, FD003\nfilter = SM7:5,SM12:3\nsequence_length = 4\n\
             data.FD003 = /elsewhere\nearly_stop_window = 0\ncumsum_signals = SM2\n",
        )
        .unwrap();
        assert_eq!(cfg.agents, vec![AgentId::Fd001, AgentId::Fd003]);
        assert_eq!(cfg.agent_dir(AgentId::Fd003), Path::new("/elsewhere"));
        assert_eq!(cfg.pipeline.rounds.early_stop, None);
        assert_eq!(ExperimentConfig::parse(&cfg.render()).unwrap(), cfg);
        cfg.pipeline.rounds.train.learning_rate = 0.002;
        assert_eq!(ExperimentConfig::parse(&cfg.render()).unwrap(), cfg);
        let d = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&d.render()).unwrap(), d);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "bogus = 1",
            "seed = x",
            "seed = 1\nseed = 2",
            "agents = FD009",
            "filter = SM99:3",
            "filter = SM7:4",
            "sequence_length = 0",
            "no equals sign",
            "agents =",
        ] {
            assert!(
                matches!(ExperimentConfig::parse(bad), Err(CliError::Usage(_))),
                "{bad}"
            );
        }
    }
}
