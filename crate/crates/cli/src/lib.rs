//! `fedrul` command-line driver.

pub mod commands;
pub mod config;
pub mod grid;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fedrul::experiment::ExperimentError;
use fedrul::fed::FedError;
use fedrul::nn::NnError;
use fedrul::AgentId;
use thiserror::Error;

pub use config::ExperimentConfig;

/// Failure classes, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let msg = e.to_string();
        match e {
            ExperimentError::Nn(NnError::NonFiniteLoss { .. })
            | ExperimentError::Fed(FedError::Client {
                source: NnError::NonFiniteLoss { .. },
                ..
            }) => CliError::Numeric(msg),
            ExperimentError::Fed(FedError::BadConfig(_))
            | ExperimentError::Nn(NnError::BadConfig(_)) => CliError::Usage(msg),
            _ => CliError::Data(msg),
        }
    }
}

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_error(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Debug, Parser)]
#[command(
    name = "fedrul",
    version,
    about = "Federated remaining-useful-life experiments on C-MAPSS data"
)]
pub struct Cli {
    /// Experiment configuration file (flat `key = value`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the configured data directory.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// Format of the report printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct ModeArgs {
    /// Train a single agent on its own data.
    #[arg(long, value_name = "AGENT")]
    pub local: Option<AgentId>,
    /// Federate over the configured agents.
    #[arg(long)]
    pub federated: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and label raw files, write canonical csv tables and report unit counts.
    Ingest {
        /// Agents to ingest; defaults to the configured agents.
        #[arg(long = "agent", value_name = "AGENT")]
        agents: Vec<AgentId>,
    },
    /// Correlation matrix of one agent's training data as csv and SVG.
    Heatmap {
        #[arg(long)]
        agent: AgentId,
    },
    /// Run the full pipeline and write the model, round log and summary.
    Train {
        #[command(flatten)]
        mode: ModeArgs,
    },
    /// Score a weight file on one agent's split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        agent: AgentId,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
    },
    /// Exhaustive hyperparameter search ranked by validation RMSE.
    GridSearch {
        #[command(flatten)]
        mode: ModeArgs,
        /// Grid file with one `axis = v1,v2,...` line per axis; the full grid when omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Only enumerate the configurations.
        #[arg(long)]
        list: bool,
    },
    /// One-sided t-tests of error series against reference means, with confidence intervals.
    Compare {
        /// Csv with one column per error series.
        #[arg(long)]
        errors: PathBuf,
        /// Csv `study,mu0`; the five reference studies when omitted.
        #[arg(long)]
        baselines: Option<PathBuf>,
        #[arg(long, required = true)]
        alpha: f64,
        #[arg(long, default_value_t = 0.95)]
        ci_level: f64,
    },
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(dir) = &cli.data_dir {
        cfg.data_dir = dir.clone();
    }
    match &cli.command {
        Command::Train { mode } | Command::GridSearch { mode, .. } => {
            if let Some(agent) = mode.local {
                cfg.agents = vec![agent];
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    write_file(&cfg.output_dir.join("config.resolved"), cfg.render())?;
    let report = match &cli.command {
        Command::Ingest { agents } => commands::ingest(&cfg, agents, cli.format)?,
        Command::Heatmap { agent } => commands::heatmap(&cfg, *agent, cli.format)?,
        Command::Train { .. } => commands::train(&cfg, cli.format)?,
        Command::Evaluate {
            model,
            agent,
            split,
        } => commands::evaluate(&cfg, model, *agent, *split, cli.format)?,
        Command::GridSearch { grid, list, .. } => {
            grid::grid_search(&cfg, grid.as_deref(), *list, cli.format)?
        }
        Command::Compare {
            errors,
            baselines,
            alpha,
            ci_level,
        } => commands::compare(
            &cfg,
            errors,
            baselines.as_deref(),
            *alpha,
            *ci_level,
            cli.format,
        )?,
    };
    stdout
        .write_all(report.as_bytes())
        .map_err(|e| CliError::Data(format!("stdout: {e}")))
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli, &mut std::io::stdout().lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
