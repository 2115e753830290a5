//! Exhaustive hyperparameter search over the tuner axes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use fedrul::experiment::{run_experiment, PipelineConfig, PreparedAgent};

use crate::commands::prepare_all;
use crate::config::ExperimentConfig;
use crate::{io_error, write_file, CliError, Format};

/// Axes in enumeration order (the first varies slowest).
pub const AXES: [&str; 6] = [
    "sequence_length",
    "batch_size",
    "dropout",
    "recurrent_dropout",
    "learning_rate",
    "noise_sigma",
];

/// Permitted values per axis.
pub fn allowed(axis: &str) -> &'static [f64] {
    match axis {
        "sequence_length" => &[1.0, 2.0, 4.0, 8.0],
        "batch_size" => &[1.0, 8.0, 32.0],
        "dropout" => &[0.1, 0.2, 0.3],
        "recurrent_dropout" => &[0.1, 0.2],
        "learning_rate" => &[0.0001, 0.001, 0.002],
        "noise_sigma" => &[0.01, 0.1],
        _ => &[],
    }
}

/// One point of the grid, in `AXES` order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint(pub [f64; 6]);

impl GridPoint {
    fn of(cfg: &PipelineConfig) -> Self {
        let t = &cfg.rounds.train;
        GridPoint([
            cfg.features.sequence_length as f64,
            t.batch_size as f64,
            t.dropout,
            t.recurrent_dropout,
            t.learning_rate,
            t.gaussian_noise_sigma,
        ])
    }

    pub fn apply(&self, base: &PipelineConfig) -> PipelineConfig {
        let mut cfg = base.clone();
        let [l, b, d, rd, lr, s] = self.0;
        cfg.features.sequence_length = l as usize;
        let t = &mut cfg.rounds.train;
        t.batch_size = b as usize;
        t.dropout = d;
        t.recurrent_dropout = rd;
        t.learning_rate = lr;
        t.gaussian_noise_sigma = s;
        cfg
    }

    pub fn sequence_length(&self) -> usize {
        self.0[0] as usize
    }
}

/// Values per axis. Axes absent from the grid keep the base configuration's value.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub axes: [Vec<f64>; 6],
}

impl Grid {
    pub fn full() -> Self {
        Grid {
            axes: AXES.map(|a| allowed(a).to_vec()),
        }
    }

    pub fn parse(text: &str, base: &PipelineConfig) -> Result<Self, CliError> {
        let usage = |m: String| CliError::Usage(m);
        let mut given: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                usage(format!(
                    "grid line {}: expected `axis = v1,v2,...`",
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            let axis = AXES
                .iter()
                .copied()
                .find(|a| *a == key)
                .ok_or_else(|| usage(format!("unknown grid axis `{key}`")))?;
            let mut values = Vec::new();
            for s in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let v: f64 = s
                    .parse()
                    .map_err(|_| usage(format!("grid axis `{axis}`: cannot parse `{s}`")))?;
                if !allowed(axis).contains(&v) {
                    return Err(usage(format!(
                        "grid axis `{axis}`: {s} is outside the permitted values {:?}",
                        allowed(axis)
                    )));
                }
                if !values.contains(&v) {
                    values.push(v);
                }
            }
            if values.is_empty() {
                return Err(usage(format!("grid axis `{axis}` has no values")));
            }
            if given.insert(axis, values).is_some() {
                return Err(usage(format!("grid axis `{axis}` given twice")));
            }
        }
        let fallback = GridPoint::of(base);
        let axes =
            std::array::from_fn(|i| given.remove(AXES[i]).unwrap_or_else(|| vec![fallback.0[i]]));
        Ok(Grid { axes })
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cartesian product, first axis slowest.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = vec![[0.0; 6]];
        for (i, values) in self.axes.iter().enumerate() {
            out = out
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p;
                        q[i] = v;
                        q
                    })
                })
                .collect();
        }
        out.into_iter().map(GridPoint).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub index: usize,
    pub point: GridPoint,
    pub validation_rmse: Option<f64>,
    pub test_rmse: Option<f64>,
}

/// Sorts by validation RMSE, missing values last, ties in enumeration order.
pub fn rank(results: &mut [GridResult]) {
    results.sort_by(|a, b| {
        let key = |r: &GridResult| r.validation_rmse.unwrap_or(f64::INFINITY);
        key(a).total_cmp(&key(b)).then(a.index.cmp(&b.index))
    });
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v:?}"))
}

fn point_cells(p: &GridPoint) -> String {
    let [l, b, d, rd, lr, s] = p.0;
    format!("{},{},{d:?},{rd:?},{lr:?},{s:?}", l as usize, b as usize)
}

pub fn results_csv(results: &[GridResult]) -> String {
    let mut out = format!("rank,index,{},validation_rmse,test_rmse\n", AXES.join(","));
    for (rank, r) in results.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            rank + 1,
            r.index,
            point_cells(&r.point),
            opt(r.validation_rmse),
            opt(r.test_rmse)
        );
    }
    out
}

/// The winning configuration as a two-column hyperparameter table.
pub fn best_table(best: &GridResult) -> String {
    let [l, b, d, rd, lr, s] = best.point.0;
    let mut out = format!("{:<20} {}\n", "Hyperparameter", "Value");
    for (name, v) in [
        ("Sequence length", format!("{}", l as usize)),
        ("Batch size", format!("{}", b as usize)),
        ("Dropout", format!("{d}")),
        ("Recurrent dropout", format!("{rd}")),
        ("Learning rate", format!("{lr}")),
        ("Gaussian noise", format!("{s}")),
    ] {
        let _ = writeln!(out, "{name:<20} {v}");
    }
    let _ = writeln!(
        out,
        "{:<20} {}",
        "Validation RMSE",
        opt(best.validation_rmse)
    );
    out
}

pub fn grid_search(
    cfg: &ExperimentConfig,
    grid_file: Option<&Path>,
    list: bool,
    format: Format,
) -> Result<String, CliError> {
    let grid = match grid_file {
        Some(p) => Grid::parse(
            &std::fs::read_to_string(p).map_err(|e| io_error(p, e))?,
            &cfg.pipeline,
        )?,
        None => Grid::full(),
    };
    let points = grid.points();
    if list {
        let mut out = format!("index,{}\n", AXES.join(","));
        for (i, p) in points.iter().enumerate() {
            let _ = writeln!(out, "{i},{}", point_cells(p));
        }
        return Ok(match format {
            Format::Csv => out,
            Format::Text => format!("{} configurations\n", points.len()),
        });
    }

    // Preprocessing only depends on the sequence length among the grid axes.
    let mut prepared: BTreeMap<usize, Vec<PreparedAgent>> = BTreeMap::new();
    let mut results = Vec::with_capacity(points.len());
    for (index, point) in points.iter().enumerate() {
        let pipeline = point.apply(&cfg.pipeline);
        let key = point.sequence_length();
        if let std::collections::btree_map::Entry::Vacant(e) = prepared.entry(key) {
            let sub = ExperimentConfig {
                pipeline: pipeline.clone(),
                ..cfg.clone()
            };
            e.insert(prepare_all(&sub)?);
        }
        let result = run_experiment(&prepared[&key], &pipeline, &mut |_| {})?;
        let agg = result.summary.last().expect("aggregate row");
        results.push(GridResult {
            index,
            point: *point,
            validation_rmse: agg.validation_rmse,
            test_rmse: agg.test.as_ref().map(|m| m.rmse),
        });
    }
    rank(&mut results);
    let csv = results_csv(&results);
    let best = best_table(&results[0]);
    write_file(&cfg.output_dir.join("grid_results.csv"), &csv)?;
    write_file(&cfg.output_dir.join("grid_best.txt"), &best)?;
    Ok(match format {
        Format::Csv => csv,
        Format::Text => format!("{} configurations evaluated\n\n{best}", results.len()),
    })
}
