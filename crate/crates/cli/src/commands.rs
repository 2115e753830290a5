use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use fedrul::cmapss::{write_table_csv, Split};
use fedrul::experiment::{
    load_agent, prepare_agent, rounds_csv, run_experiment, summary_csv, summary_text, PreparedAgent,
};
use fedrul::fed::{deserialize_params, serialize_params};
use fedrul::nn::predict;
use fedrul::preprocess::correlation_matrix;
use fedrul::stats::{
    compare_models, comparisons_csv, comparisons_text, compute_metrics, confidence_interval,
    intervals_csv, intervals_text, reference_baselines, Baseline,
};
use fedrul::AgentId;

use crate::config::ExperimentConfig;
use crate::svg::heatmap_svg;
use crate::{io_error, write_file, CliError, Format, SplitArg};

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

pub fn prepare_all(cfg: &ExperimentConfig) -> Result<Vec<PreparedAgent>, CliError> {
    cfg.agents
        .iter()
        .map(|&a| {
            let data = load_agent(cfg.agent_dir(a), a)?;
            Ok(prepare_agent(&data, &cfg.pipeline)?)
        })
        .collect()
}

pub fn ingest(
    cfg: &ExperimentConfig,
    agents: &[AgentId],
    format: Format,
) -> Result<String, CliError> {
    let agents = if agents.is_empty() {
        &cfg.agents[..]
    } else {
        agents
    };
    let mut csv = String::from("agent,train_units,test_units,train_rows,test_rows\n");
    let mut text = String::new();
    for &agent in agents {
        let data = load_agent(cfg.agent_dir(agent), agent)?;
        let (tr, te) = (data.train.units().len(), data.test.units().len());
        for (split, table) in [("train", &data.train), ("test", &data.test)] {
            write_file(
                &cfg.output_dir.join(format!("{agent}_{split}.csv")),
                write_table_csv(table),
            )?;
        }
        let _ = writeln!(
            csv,
            "{agent},{tr},{te},{},{}",
            data.train.len(),
            data.test.len()
        );
        let _ = writeln!(
            text,
            "{agent}: train {tr} units ({} rows), test {te} units ({} rows)",
            data.train.len(),
            data.test.len()
        );
        for (split, n) in [(Split::Train, tr), (Split::Test, te)] {
            let want = agent.expected_units(split);
            if n != want {
                let _ = writeln!(
                    text,
                    "  note: {split:?} has {n} units, the NASA release has {want}"
                );
            }
        }
    }
    write_file(&cfg.output_dir.join("ingest.csv"), &csv)?;
    Ok(match format {
        Format::Csv => csv,
        Format::Text => text,
    })
}

pub fn heatmap(cfg: &ExperimentConfig, agent: AgentId, format: Format) -> Result<String, CliError> {
    let data = load_agent(cfg.agent_dir(agent), agent)?;
    let m = correlation_matrix(&data.train).map_err(data_err)?;
    write_file(
        &cfg.output_dir.join(format!("heatmap_{agent}.csv")),
        m.to_csv(),
    )?;
    write_file(
        &cfg.output_dir.join(format!("heatmap_{agent}.svg")),
        heatmap_svg(&m),
    )?;
    let ranked = m.rank_against_rul();
    Ok(match format {
        Format::Csv => {
            let mut out = String::from("signal,corr_rul\n");
            for (label, r) in &ranked {
                let _ = writeln!(out, "{label},{r:?}");
            }
            out
        }
        Format::Text => {
            let mut out = format!("{agent}: signals by |corr(., RUL)|\n");
            for (label, r) in ranked.iter().take(10) {
                let _ = writeln!(out, "  {label:<5} {r:+.4}");
            }
            out
        }
    })
}

pub fn train(cfg: &ExperimentConfig, format: Format) -> Result<String, CliError> {
    let agents = prepare_all(cfg)?;
    let mut exchanges = 0usize;
    let result = run_experiment(&agents, &cfg.pipeline, &mut |_| exchanges += 1)?;
    let out = &cfg.output_dir;
    write_file(
        &out.join("model.frul"),
        serialize_params(&result.outcome.global).map_err(data_err)?,
    )?;
    write_file(&out.join("rounds.csv"), rounds_csv(&result.outcome))?;
    let csv = summary_csv(&result.summary);
    let text = summary_text(&result.summary);
    write_file(&out.join("summary.csv"), &csv)?;
    write_file(&out.join("summary.txt"), &text)?;
    Ok(match format {
        Format::Csv => csv,
        Format::Text => {
            let wall: f64 = result
                .outcome
                .reports
                .iter()
                .map(|r| r.wall_time.as_secs_f64())
                .sum();
            format!(
                "{text}\n{} rounds, {exchanges} weight exchanges, {wall:.1} s\n",
                result.outcome.reports.len()
            )
        }
    })
}

pub fn evaluate(
    cfg: &ExperimentConfig,
    model: &Path,
    agent: AgentId,
    split: SplitArg,
    format: Format,
) -> Result<String, CliError> {
    let bytes = std::fs::read(model).map_err(|e| io_error(model, e))?;
    let params = deserialize_params(&bytes)
        .map_err(|e| CliError::Data(format!("{}: {e}", model.display())))?;
    let arch = params
        .architecture()
        .map_err(|e| CliError::Data(format!("{}: {e}", model.display())))?;
    let data = load_agent(cfg.agent_dir(agent), agent)?;
    let prepared = prepare_agent(&data, &cfg.pipeline)?;
    let batch = match split {
        SplitArg::Train => &prepared.train,
        SplitArg::Test => &prepared.test,
    };
    if arch.input_features != batch.feature_count() {
        return Err(CliError::Data(format!(
            "model expects {} input features but the configuration produces {}",
            arch.input_features,
            batch.feature_count()
        )));
    }
    if batch.is_empty() {
        return Err(CliError::Data(format!("{agent}: no windows to evaluate")));
    }
    let pred = predict(&batch.inputs, &params, 256).map_err(data_err)?;
    let m = compute_metrics(&pred, &batch.targets).map_err(data_err)?;

    let split_name = match split {
        SplitArg::Train => "train",
        SplitArg::Test => "test",
    };
    let mut rows = String::from("unit,end_cycle,target,prediction\n");
    for ((p, t), prov) in pred.iter().zip(&batch.targets).zip(&batch.provenance) {
        let _ = writeln!(rows, "{},{},{t:?},{p:?}", prov.unit, prov.end_cycle);
    }
    write_file(
        &cfg.output_dir
            .join(format!("predictions_{agent}_{split_name}.csv")),
        rows,
    )?;
    let r2 = m.r_squared.map_or(String::new(), |r| format!("{r:?}"));
    let csv = format!(
        "agent,split,n,rmse,mae,r2\n{agent},{split_name},{},{:?},{:?},{r2}\n",
        m.n, m.rmse, m.mae
    );
    write_file(
        &cfg.output_dir
            .join(format!("evaluation_{agent}_{split_name}.csv")),
        &csv,
    )?;
    Ok(match format {
        Format::Csv => csv,
        Format::Text => format!(
            "{agent} {split_name}: {} predictions, RMSE {:.4}, MAE {:.4}, R2 {}\n",
            m.n,
            m.rmse,
            m.mae,
            m.r_squared.map_or("-".into(), |r| format!("{r:.4}"))
        ),
    })
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| CliError::Data(format!("{}: empty file", path.display())))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|s| s.trim().to_string()).collect())
        .collect();
    Ok((header, rows))
}

fn parse_f64(path: &Path, line: usize, s: &str) -> Result<f64, CliError> {
    s.parse().map_err(|_| {
        CliError::Data(format!(
            "{}: line {line}: `{s}` is not a number",
            path.display()
        ))
    })
}

/// Columns of a csv as named error series; blank cells are skipped.
pub fn read_error_series(path: &Path) -> Result<BTreeMap<String, Vec<f64>>, CliError> {
    let (header, rows) = read_csv(path)?;
    let mut series: BTreeMap<String, Vec<f64>> =
        header.iter().map(|h| (h.clone(), Vec::new())).collect();
    for (i, row) in rows.iter().enumerate() {
        if row.len() > header.len() {
            return Err(CliError::Data(format!(
                "{}: line {} has too many cells",
                path.display(),
                i + 2
            )));
        }
        for (name, cell) in header.iter().zip(row) {
            if !cell.is_empty() {
                series
                    .get_mut(name)
                    .expect("header key")
                    .push(parse_f64(path, i + 2, cell)?);
            }
        }
    }
    Ok(series)
}

pub fn read_baselines(path: &Path) -> Result<Vec<Baseline>, CliError> {
    let (header, rows) = read_csv(path)?;
    if header.len() != 2 {
        return Err(CliError::Data(format!(
            "{}: expected header `study,mu0`",
            path.display()
        )));
    }
    rows.iter()
        .enumerate()
        .map(|(i, row)| match row.as_slice() {
            [study, mu0] => Ok(Baseline::new(study.clone(), parse_f64(path, i + 2, mu0)?)),
            _ => Err(CliError::Data(format!(
                "{}: line {} needs two cells",
                path.display(),
                i + 2
            ))),
        })
        .collect()
}

pub fn compare(
    cfg: &ExperimentConfig,
    errors: &Path,
    baselines: Option<&Path>,
    alpha: f64,
    ci_level: f64,
    format: Format,
) -> Result<String, CliError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Usage(format!(
            "--alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let series = read_error_series(errors)?;
    let baselines = match baselines {
        Some(p) => read_baselines(p)?,
        None => reference_baselines(),
    };
    let rows = compare_models(&series, &baselines, alpha).map_err(data_err)?;
    let intervals = series
        .iter()
        .map(|(name, s)| {
            Ok((
                name.clone(),
                confidence_interval(s, ci_level).map_err(data_err)?,
            ))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    write_file(&cfg.output_dir.join("compare.csv"), comparisons_csv(&rows))?;
    write_file(
        &cfg.output_dir.join("intervals.csv"),
        intervals_csv(&intervals),
    )?;
    Ok(match format {
        Format::Csv => format!("{}\n{}", comparisons_csv(&rows), intervals_csv(&intervals)),
        Format::Text => format!(
            "{}\n{}",
            comparisons_text(&rows),
            intervals_text(&intervals)
        ),
    })
}
