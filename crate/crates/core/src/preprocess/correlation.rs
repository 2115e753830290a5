use std::fmt::Write as _;

use super::PreprocessError;
use crate::cmapss::{TimeSeriesTable, SIGNAL_COUNT};
use crate::stats::{is_constant, pearson};

/// Pearson matrix over OS1..OS3, SM1..SM21 and RUL.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    /// Row-major, `labels.len()` squared.
    pub values: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size() + j]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Signals ordered by decreasing |correlation| with RUL.
    pub fn rank_against_rul(&self) -> Vec<(String, f64)> {
        let rul = self.size() - 1;
        let mut ranked: Vec<(String, f64)> = (0..rul)
            .map(|i| (self.labels[i].clone(), self.get(i, rul)))
            .collect();
        ranked.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
        ranked
    }

    /// Header row of labels, then one labeled row per variable.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for l in &self.labels {
            let _ = write!(out, ",{l}");
        }
        out.push('\n');
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(l);
            for j in 0..self.size() {
                let _ = write!(out, ",{:?}", self.get(i, j));
            }
            out.push('\n');
        }
        out
    }
}

/// Zero-variance columns correlate 0 with everything, themselves included.
pub fn correlation_matrix(table: &TimeSeriesTable) -> Result<CorrelationMatrix, PreprocessError> {
    if !table.is_labeled() {
        return Err(PreprocessError::Unlabeled);
    }
    if table.len() < 2 {
        return Err(PreprocessError::EmptyTable);
    }
    let mut columns: Vec<Vec<f64>> = (0..SIGNAL_COUNT).map(|j| table.column(j)).collect();
    columns.push(
        table
            .rows()
            .iter()
            .map(|r| f64::from(r.rul.unwrap_or(0)))
            .collect(),
    );
    let mut labels: Vec<String> = table.feature_names()[..SIGNAL_COUNT].to_vec();
    labels.push("RUL".into());

    let n = columns.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = if is_constant(&columns[i]) { 0.0 } else { 1.0 };
        for j in i + 1..n {
            let r = pearson(&columns[i], &columns[j]).unwrap_or(0.0);
            values[i * n + j] = r;
            values[j * n + i] = r;
        }
    }
    Ok(CorrelationMatrix { labels, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmapss::synthetic::{generate, FleetSpec};
    use crate::cmapss::{label_train_rul, signal_labels, AgentId, Record};

    #[test]
    fn identical_and_negated_columns() {
        let rows = (1..=6)
            .map(|c| {
                let mut features = vec![1.0; 24];
                let v = f64::from(c * c);
                features[3] = v;
                features[4] = v;
                features[5] = -v;
                Record {
                    unit: 1,
                    cycle: c,
                    features,
                    rul: None,
                }
            })
            .collect();
        let t =
            label_train_rul(&TimeSeriesTable::new(AgentId::Fd001, signal_labels(), rows).unwrap());
        let m = correlation_matrix(&t).unwrap();
        assert_eq!(m.size(), 25);
        assert!((m.get(3, 4) - 1.0).abs() < 1e-12);
        assert!((m.get(3, 5) + 1.0).abs() < 1e-12);
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.get(0, 3), 0.0);
        assert_eq!(m.get(3, 3), 1.0);
        assert_eq!(m.to_csv().lines().count(), 26);
    }

    #[test]
    fn symmetric_and_bounded() {
        let t = label_train_rul(&generate(&FleetSpec::new(AgentId::Fd001, 8, 0, 2)).train);
        let m = correlation_matrix(&t).unwrap();
        for i in 0..m.size() {
            for j in 0..m.size() {
                assert!((m.get(i, j) - m.get(j, i)).abs() <= 1e-12);
                assert!((-1.0..=1.0).contains(&m.get(i, j)));
            }
        }
        let top: Vec<String> = m
            .rank_against_rul()
            .into_iter()
            .take(6)
            .map(|x| x.0)
            .collect();
        assert!(top.contains(&"SM7".to_string()), "{top:?}");
    }

    #[test]
    fn requires_labels() {
        let t = generate(&FleetSpec::new(AgentId::Fd001, 1, 0, 2)).train;
        assert!(matches!(
            correlation_matrix(&t),
            Err(PreprocessError::Unlabeled)
        ));
    }
}
