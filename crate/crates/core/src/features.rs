//! Engineered columns (running sums, signed rates of change) and the fixed-length
//! windows fed to the recurrent model.

use thiserror::Error;

use crate::cmapss::{AgentId, TimeSeriesTable, SETTING_COUNT, SIGNAL_COUNT};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("rate-of-change step must be at least 1, got {0}")]
    BadStep(usize),
    #[error("sequence length must be at least 1")]
    BadSequenceLength,
    #[error("signal index {index} out of range (have {count})")]
    SignalOutOfRange { index: usize, count: usize },
    #[error("table has no RUL labels")]
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureConfig {
    pub cumsum_signals: Vec<usize>,
    pub derivative_signals: Vec<usize>,
    pub dt: usize,
    pub sequence_length: usize,
}

impl Default for FeatureConfig {
    /// Derivatives of all 21 sensors, no running sums, windows of 8.
    fn default() -> Self {
        Self {
            cumsum_signals: Vec::new(),
            derivative_signals: (SETTING_COUNT..SIGNAL_COUNT).collect(),
            dt: 1,
            sequence_length: 8,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.dt < 1 {
            return Err(FeatureError::BadStep(self.dt));
        }
        if self.sequence_length < 1 {
            return Err(FeatureError::BadSequenceLength);
        }
        for &s in self.cumsum_signals.iter().chain(&self.derivative_signals) {
            if s >= SIGNAL_COUNT {
                return Err(FeatureError::SignalOutOfRange {
                    index: s,
                    count: SIGNAL_COUNT,
                });
            }
        }
        Ok(())
    }

    /// Width of a table after `engineer`.
    pub fn feature_count(&self) -> usize {
        SIGNAL_COUNT + self.cumsum_signals.len() + self.derivative_signals.len()
    }
}

pub fn cumulative_sum(signal: &[f64]) -> Vec<f64> {
    signal
        .iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// `(x[i] - x[i-dt]) / dt`, with the first `dt` entries set to 0.
pub fn rate_of_change(signal: &[f64], dt: usize) -> Result<Vec<f64>, FeatureError> {
    if dt < 1 {
        return Err(FeatureError::BadStep(dt));
    }
    let step = dt as f64;
    Ok((0..signal.len())
        .map(|i| {
            if i < dt {
                0.0
            } else {
                (signal[i] - signal[i - dt]) / step
            }
        })
        .collect())
}

/// Appends `<label>_cumsum` then `<label>_d<dt>` columns, computed per unit.
pub fn engineer(
    table: &TimeSeriesTable,
    cfg: &FeatureConfig,
) -> Result<TimeSeriesTable, FeatureError> {
    cfg.validate()?;
    let mut out = table.clone();
    for &s in &cfg.cumsum_signals {
        let name = format!("{}_cumsum", table.feature_names()[s]);
        out.push_column(name, |t, span| cumulative_sum(&t.unit_column(span, s)));
    }
    for &s in &cfg.derivative_signals {
        let name = format!("{}_d{}", table.feature_names()[s], cfg.dt);
        out.push_column(name, |t, span| {
            rate_of_change(&t.unit_column(span, s), cfg.dt).expect("dt validated")
        });
    }
    Ok(out)
}

/// Where a window came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub agent: AgentId,
    pub unit: u32,
    pub end_cycle: u32,
}

/// Windows `[batch, sequence_length, features]` with their RUL targets.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    pub inputs: Tensor,
    pub targets: Vec<f64>,
    pub provenance: Vec<Provenance>,
}

impl SequenceBatch {
    pub fn empty(sequence_length: usize, features: usize) -> Self {
        Self {
            inputs: Tensor::zeros(&[0, sequence_length, features]),
            targets: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn sequence_length(&self) -> usize {
        self.inputs.shape()[1]
    }

    pub fn feature_count(&self) -> usize {
        self.inputs.shape()[2]
    }

    /// Flattened inputs of one sample.
    pub fn sample(&self, i: usize) -> &[f64] {
        let w = self.sequence_length() * self.feature_count();
        &self.inputs.data()[i * w..(i + 1) * w]
    }

    /// Copies the listed samples, in order, into a new batch.
    pub fn gather(&self, indices: &[usize]) -> SequenceBatch {
        let (l, f) = (self.sequence_length(), self.feature_count());
        let mut data = Vec::with_capacity(indices.len() * l * f);
        for &i in indices {
            data.extend_from_slice(self.sample(i));
        }
        SequenceBatch {
            inputs: Tensor::from_vec(&[indices.len(), l, f], data).expect("sizes agree"),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            provenance: indices.iter().map(|&i| self.provenance[i]).collect(),
        }
    }

    /// Stacks batches with equal window shape. `None` when shapes disagree or the list is empty.
    pub fn concat(batches: &[&SequenceBatch]) -> Option<SequenceBatch> {
        let first = batches.first()?;
        let (l, f) = (first.sequence_length(), first.feature_count());
        if batches
            .iter()
            .any(|b| b.sequence_length() != l || b.feature_count() != f)
        {
            return None;
        }
        let n: usize = batches.iter().map(|b| b.len()).sum();
        let mut data = Vec::with_capacity(n * l * f);
        let mut targets = Vec::with_capacity(n);
        let mut provenance = Vec::with_capacity(n);
        for b in batches {
            data.extend_from_slice(b.inputs.data());
            targets.extend_from_slice(&b.targets);
            provenance.extend_from_slice(&b.provenance);
        }
        Some(SequenceBatch {
            inputs: Tensor::from_vec(&[n, l, f], data).expect("sizes agree"),
            targets,
            provenance,
        })
    }
}

/// Which windows `build_windows` emits per unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    /// One window ending at every cycle.
    EveryCycle,
    /// Only the window ending at the unit's last cycle (test tables).
    LastCycle,
}

/// Cuts each unit into windows of `sequence_length` rows. Windows that would
/// start before the unit's first row repeat that row instead.
pub fn build_windows(
    table: &TimeSeriesTable,
    sequence_length: usize,
    mode: WindowMode,
) -> Result<SequenceBatch, FeatureError> {
    if sequence_length < 1 {
        return Err(FeatureError::BadSequenceLength);
    }
    if !table.is_labeled() && !table.is_empty() {
        return Err(FeatureError::Unlabeled);
    }
    let f = table.feature_count();
    let mut data = Vec::new();
    let mut targets = Vec::new();
    let mut provenance = Vec::new();
    for span in table.units() {
        let rows = &table.rows()[span.rows.clone()];
        let ends = match mode {
            WindowMode::EveryCycle => 0..rows.len(),
            WindowMode::LastCycle => rows.len() - 1..rows.len(),
        };
        for end in ends {
            for k in 0..sequence_length {
                // row index end - (L-1) + k, clamped at the unit start
                let idx = (end + k + 1).saturating_sub(sequence_length);
                data.extend_from_slice(&rows[idx].features);
            }
            let row = &rows[end];
            targets.push(f64::from(row.rul.expect("table is labeled")));
            provenance.push(Provenance {
                agent: table.agent(),
                unit: row.unit,
                end_cycle: row.cycle,
            });
        }
    }
    Ok(SequenceBatch {
        inputs: Tensor::from_vec(&[targets.len(), sequence_length, f], data)
            .expect("one row per step"),
        targets,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmapss::synthetic::{generate, FleetSpec};
    use crate::cmapss::{label_test_rul, label_train_rul, signal_labels, Record};
    use proptest::prelude::*;

    #[test]
    fn cumsum_examples() {
        assert_eq!(cumulative_sum(&[1., 3., 6.]), vec![1., 4., 10.]);
        assert_eq!(cumulative_sum(&[0.; 3]), vec![0.; 3]);
        assert_eq!(cumulative_sum(&[2.5]), vec![2.5]);
        assert!(cumulative_sum(&[]).is_empty());
    }

    #[test]
    fn rate_examples() {
        assert_eq!(rate_of_change(&[1., 3., 6.], 1).unwrap(), vec![0., 2., 3.]);
        assert_eq!(rate_of_change(&[1., 3., 6.], 2).unwrap(), vec![0., 0., 2.5]);
        assert_eq!(rate_of_change(&[4.; 5], 1).unwrap(), vec![0.; 5]);
        assert_eq!(rate_of_change(&[1., 2.], 5).unwrap(), vec![0., 0.]);
        assert_eq!(rate_of_change(&[1.], 0), Err(FeatureError::BadStep(0)));
    }

    proptest! {
        #[test]
        fn rate_inverts_cumsum(signal in prop::collection::vec(-50i32..50, 1..40)) {
            // integer-valued inputs keep the sums exact
            let x: Vec<f64> = signal.iter().map(|&v| f64::from(v)).collect();
            let back = rate_of_change(&cumulative_sum(&x), 1).unwrap();
            prop_assert_eq!(back[0], 0.0);
            prop_assert_eq!(&back[1..], &x[1..]);
        }
    }

    fn unit_table(lengths: &[usize]) -> TimeSeriesTable {
        let mut rows = Vec::new();
        for (u, &n) in lengths.iter().enumerate() {
            for c in 0..n {
                let mut features = vec![0.0; SIGNAL_COUNT];
                features[0] = (u * 1000 + c) as f64;
                features[5] = (c * c) as f64;
                rows.push(Record {
                    unit: u as u32 + 1,
                    cycle: c as u32 + 1,
                    features,
                    rul: None,
                });
            }
        }
        TimeSeriesTable::new(AgentId::Fd001, signal_labels(), rows).unwrap()
    }

    #[test]
    fn engineered_columns_are_per_unit() {
        let t = unit_table(&[3, 2]);
        let cfg = FeatureConfig {
            cumsum_signals: vec![5],
            derivative_signals: vec![5],
            dt: 1,
            sequence_length: 2,
        };
        let e = engineer(&t, &cfg).unwrap();
        assert_eq!(e.feature_count(), cfg.feature_count());
        assert_eq!(e.feature_names()[24], "SM3_cumsum");
        assert_eq!(e.feature_names()[25], "SM3_d1");
        assert_eq!(e.column(24), vec![0., 1., 5., 0., 1.]);
        assert_eq!(e.column(25), vec![0., 1., 3., 0., 1.]);
        assert_eq!(FeatureConfig::default().feature_count(), 45);
        let bad = FeatureConfig { dt: 0, ..cfg };
        assert!(engineer(&t, &bad).is_err());
    }

    #[test]
    fn five_cycles_five_windows() {
        let t = label_train_rul(&unit_table(&[5]));
        let b = build_windows(&t, 2, WindowMode::EveryCycle).unwrap();
        assert_eq!(b.len(), 5);
        assert_eq!(b.inputs.shape(), &[5, 2, SIGNAL_COUNT]);
        assert_eq!(b.targets, vec![4., 3., 2., 1., 0.]);
        // first window is the first row twice
        assert_eq!(b.sample(0)[0], 0.0);
        assert_eq!(b.sample(0)[SIGNAL_COUNT], 0.0);
        assert_eq!(b.sample(4)[0], 3.0);
        assert_eq!(b.sample(4)[SIGNAL_COUNT], 4.0);
        let single = build_windows(&t, 1, WindowMode::EveryCycle).unwrap();
        assert_eq!(single.inputs.shape(), &[5, 1, SIGNAL_COUNT]);
        assert!(build_windows(&t, 0, WindowMode::EveryCycle).is_err());
        assert!(matches!(
            build_windows(&unit_table(&[3]), 2, WindowMode::EveryCycle),
            Err(FeatureError::Unlabeled)
        ));
    }

    #[test]
    fn test_unit_gives_one_window() {
        let t = label_test_rul(&unit_table(&[31, 4]), &[112, 7]).unwrap();
        let b = build_windows(&t, 8, WindowMode::LastCycle).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b.targets, vec![112., 7.]);
        assert_eq!(b.provenance[0].end_cycle, 31);
        assert_eq!(b.provenance[1].unit, 2);
    }

    proptest! {
        #[test]
        fn window_invariants(lengths in prop::collection::vec(1usize..12, 1..5), l in 1usize..6) {
            let t = label_train_rul(&unit_table(&lengths));
            let b = build_windows(&t, l, WindowMode::EveryCycle).unwrap();
            prop_assert_eq!(b.len(), lengths.iter().sum::<usize>());
            for i in 0..b.len() {
                let p = b.provenance[i];
                let w = b.sample(i);
                let end = p.end_cycle as usize;
                for k in 0..l {
                    let v = w[k * SIGNAL_COUNT];
                    // feature 0 encodes unit * 1000 + (cycle - 1)
                    let unit = (v / 1000.0).floor() as u32 + 1;
                    prop_assert_eq!(unit, p.unit);
                    let cycle = (v as usize % 1000) + 1;
                    let want = (end + k + 1).saturating_sub(l).max(1);
                    prop_assert_eq!(cycle, want);
                }
            }
        }
    }

    #[test]
    fn gather_and_concat() {
        let fleet = generate(&FleetSpec::new(AgentId::Fd001, 2, 0, 1));
        let t = label_train_rul(&fleet.train);
        let b = build_windows(&t, 3, WindowMode::EveryCycle).unwrap();
        let g = b.gather(&[4, 0]);
        assert_eq!(g.sample(0), b.sample(4));
        assert_eq!(g.targets, vec![b.targets[4], b.targets[0]]);
        let c = SequenceBatch::concat(&[&g, &b]).unwrap();
        assert_eq!(c.len(), b.len() + 2);
        assert_eq!(c.sample(2), b.sample(0));
        let other = build_windows(&t, 2, WindowMode::EveryCycle).unwrap();
        assert!(SequenceBatch::concat(&[&b, &other]).is_none());
        assert!(SequenceBatch::empty(3, 24).is_empty());
    }
}
