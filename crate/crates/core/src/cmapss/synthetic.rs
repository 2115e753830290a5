//! Small run-to-failure simulator producing tables in the C-MAPSS layout.
//!
//! Used for tests, benchmarks and demos when the NASA files are not at hand.
//! Each engine degrades as `d(t) = w0 + (1 - w0) (t / life)^1.5`; every sensor
//! is a per-condition baseline plus a signed multiple of `d(t)` plus Gaussian
//! noise. Settings follow one or six operating conditions as the agent dictates,
//! and the two-fault agents mix an HPC and a fan signature.

use rand::Rng as _;

use super::{signal_labels, AgentId, Record, TimeSeriesTable, SENSOR_COUNT, SETTING_COUNT};
use crate::rng::{derive_seed, gauss, seeded};

#[derive(Debug, Clone)]
pub struct FleetSpec {
    pub agent: AgentId,
    pub train_units: usize,
    pub test_units: usize,
    pub min_life: u32,
    pub max_life: u32,
    pub seed: u64,
}

impl FleetSpec {
    pub fn new(agent: AgentId, train_units: usize, test_units: usize, seed: u64) -> Self {
        Self {
            agent,
            train_units,
            test_units,
            min_life: 128,
            max_life: 362,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fleet {
    /// Run-to-failure trajectories, unlabeled.
    pub train: TimeSeriesTable,
    /// Trajectories cut before failure, unlabeled.
    pub test: TimeSeriesTable,
    /// Cycles left after the last test row, one per test unit.
    pub test_rul: Vec<u32>,
}

// (baseline, HPC-fault amplitude, fan-fault amplitude, noise std) per sensor SM1..SM21
const SENSORS: [(f64, f64, f64, f64); SENSOR_COUNT] = [
    (518.67, 0.0, 0.0, 0.0),
    (642.2, 1.2, 0.9, 0.45),
    (1588.0, 14.0, 9.0, 5.0),
    (1404.0, 24.0, 15.0, 7.0),
    (14.62, 0.0, 0.0, 0.0),
    (21.6, 0.0, 0.0, 0.0012),
    (553.6, -4.5, -1.2, 0.8),
    (2388.06, 0.16, 0.35, 0.06),
    (9050.0, 20.0, 12.0, 15.0),
    (1.3, 0.0, 0.0, 0.0),
    (47.4, 0.9, 0.5, 0.22),
    (521.5, -4.0, -1.0, 0.65),
    (2388.06, 0.16, 0.35, 0.06),
    (8140.0, 18.0, 10.0, 14.0),
    (8.42, 0.1, -0.08, 0.035),
    (0.03, 0.0, 0.0, 0.0),
    (393.0, 4.5, 3.0, 1.4),
    (2388.0, 0.0, 0.0, 0.0),
    (100.0, 0.0, 0.0, 0.0),
    (38.9, -0.6, -0.3, 0.17),
    (23.34, -0.38, -0.2, 0.1),
];

// (OS1, OS2, OS3, sensor baseline multiplier) for the six-condition agents
const CONDITIONS: [(f64, f64, f64, f64); 6] = [
    (0.0, 0.0, 100.0, 1.0),
    (10.0, 0.25, 100.0, 0.93),
    (20.0, 0.70, 100.0, 0.85),
    (25.0, 0.62, 60.0, 0.80),
    (35.0, 0.84, 100.0, 0.74),
    (42.0, 0.84, 100.0, 0.70),
];

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn trajectory(
    spec: &FleetSpec,
    unit: u32,
    cycles: u32,
    life: u32,
    rng: &mut crate::rng::Rng,
) -> Vec<Record> {
    let conditions = spec.agent.operating_conditions();
    let fan_fault = spec.agent.fault_modes() == 2 && rng.random_bool(0.5);
    let initial_wear: f64 = rng.random_range(0.0..0.08);
    // manufacturing spread shifts each engine's baselines slightly
    let offsets: Vec<f64> = SENSORS
        .iter()
        .map(|&(_, _, _, noise)| noise * 0.5 * gauss(rng))
        .collect();
    (1..=cycles)
        .map(|cycle| {
            let wear = initial_wear
                + (1.0 - initial_wear) * (f64::from(cycle) / f64::from(life)).powf(1.5);
            let cond = if conditions == 1 {
                0
            } else {
                rng.random_range(0..conditions)
            };
            let (os1, os2, os3, scale) = CONDITIONS[cond];
            let mut features = Vec::with_capacity(SETTING_COUNT + SENSOR_COUNT);
            if conditions == 1 {
                features.push(round4(0.002 * gauss(rng)));
                features.push(round4(0.0003 * gauss(rng)));
                features.push(100.0);
            } else {
                features.push(round4(os1 + 0.002 * gauss(rng)));
                features.push(round4(os2 + 0.0003 * gauss(rng)));
                features.push(os3);
            }
            for (j, &(base, hpc, fan, noise)) in SENSORS.iter().enumerate() {
                let amplitude = if fan_fault { fan } else { hpc };
                let z = gauss(rng);
                let value = base * scale + offsets[j] + amplitude * wear + noise * z;
                features.push(round4(value));
            }
            Record {
                unit,
                cycle,
                features,
                rul: None,
            }
        })
        .collect()
}

pub fn generate(spec: &FleetSpec) -> Fleet {
    assert!(spec.min_life >= 20 && spec.min_life <= spec.max_life);
    let mut train_rows = Vec::new();
    for u in 0..spec.train_units {
        let mut rng = seeded(derive_seed(
            spec.seed,
            &[spec.agent.index() as u64, 0, u as u64],
        ));
        let life = rng.random_range(spec.min_life..=spec.max_life);
        train_rows.extend(trajectory(spec, u as u32 + 1, life, life, &mut rng));
    }
    let mut test_rows = Vec::new();
    let mut test_rul = Vec::with_capacity(spec.test_units);
    for u in 0..spec.test_units {
        let mut rng = seeded(derive_seed(
            spec.seed,
            &[spec.agent.index() as u64, 1, u as u64],
        ));
        let life = rng.random_range(spec.min_life..=spec.max_life);
        let cut = ((f64::from(life) * rng.random_range(0.1..0.9)) as u32).max(5);
        test_rows.extend(trajectory(spec, u as u32 + 1, cut, life, &mut rng));
        test_rul.push(life - cut);
    }
    let names = signal_labels();
    Fleet {
        train: TimeSeriesTable::new(spec.agent, names.clone(), train_rows).expect("valid"),
        test: TimeSeriesTable::new(spec.agent, names, test_rows).expect("valid"),
        test_rul,
    }
}

/// Renders a raw table in the NASA whitespace layout.
pub fn to_whitespace_text(table: &TimeSeriesTable) -> String {
    let mut out = String::new();
    for row in table.rows() {
        out.push_str(&format!("{} {}", row.unit, row.cycle));
        for v in &row.features[..SETTING_COUNT + SENSOR_COUNT] {
            out.push_str(&format!(" {v}"));
        }
        out.push_str(" \n");
    }
    out
}

pub fn rul_text(ruls: &[u32]) -> String {
    ruls.iter().map(|r| format!("{r}\n")).collect()
}
