use std::collections::BTreeMap;

use super::PreprocessError;
use crate::cmapss::{TimeSeriesTable, SIGNAL_COUNT};
use crate::stats::pearson;

/// Sliding median with nearest-edge padding; output has the input's length.
pub fn median_filter(signal: &[f64], kernel: usize) -> Result<Vec<f64>, PreprocessError> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(PreprocessError::BadKernel(kernel));
    }
    if kernel == 1 || signal.len() <= 1 {
        return Ok(signal.to_vec());
    }
    let half = kernel / 2;
    let last = signal.len() - 1;
    let mut window = vec![0.0; kernel];
    Ok((0..signal.len())
        .map(|i| {
            for (slot, offset) in window.iter_mut().zip(0..kernel) {
                let j = (i + offset).saturating_sub(half).min(last);
                *slot = signal[j];
            }
            let (_, median, _) = window.select_nth_unstable_by(half, f64::total_cmp);
            *median
        })
        .collect())
}

/// Per-signal median kernel sizes. Signals absent from the map are left unfiltered.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterPlan {
    kernels: BTreeMap<usize, usize>,
}

impl FilterPlan {
    pub fn off() -> Self {
        Self::default()
    }

    pub fn from_kernels(
        kernels: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, PreprocessError> {
        let mut plan = Self::default();
        for (signal, kernel) in kernels {
            plan.set(signal, kernel)?;
        }
        Ok(plan)
    }

    pub fn set(&mut self, signal: usize, kernel: usize) -> Result<(), PreprocessError> {
        if signal >= SIGNAL_COUNT {
            return Err(PreprocessError::SignalOutOfRange {
                index: signal,
                count: SIGNAL_COUNT,
            });
        }
        if kernel == 0 || kernel.is_multiple_of(2) {
            return Err(PreprocessError::BadKernel(kernel));
        }
        self.kernels.insert(signal, kernel);
        Ok(())
    }

    /// Kernel for `signal`; 1 when unfiltered.
    pub fn kernel(&self, signal: usize) -> usize {
        self.kernels.get(&signal).copied().unwrap_or(1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.kernels.iter().map(|(&s, &k)| (s, k))
    }

    /// Filters each planned signal within each unit, never across units.
    pub fn apply(&self, table: &TimeSeriesTable) -> TimeSeriesTable {
        let mut out = table.clone();
        for (signal, kernel) in self.iter().filter(|&(_, k)| k > 1) {
            for span in table.units() {
                let filtered = median_filter(&table.unit_column(span, signal), kernel)
                    .expect("plan kernels are odd");
                out.set_unit_column(span, signal, &filtered);
            }
        }
        out
    }
}

/// Odd kernels `3, 5, ..` up to `floor(samples / 10)`.
pub fn candidate_kernels(samples: usize) -> Vec<usize> {
    (3..=samples / 10).step_by(2).collect()
}

/// Weight of one unit's vote in the geometric mean of kernels.
pub fn kernel_weight(abs_corr: f64, samples: usize) -> f64 {
    abs_corr * samples as f64
}

/// Nearest odd integer; exact ties go to the larger one.
pub fn round_to_odd(x: f64) -> usize {
    let m = ((x - 1.0) / 2.0 + 0.5).floor().max(0.0);
    2 * m as usize + 1
}

/// Best kernel for one unit and the |correlation| it reaches; `None` when the
/// unit is too short to have candidates. Correlations over fewer than three
/// points or against a constant count as zero.
pub fn best_unit_kernel(signal: &[f64], rul: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for k in candidate_kernels(signal.len()) {
        let filtered = median_filter(signal, k).expect("candidates are odd");
        let corr = if signal.len() < 3 {
            0.0
        } else {
            pearson(&filtered, rul).map_or(0.0, f64::abs)
        };
        // strict comparison keeps the smallest kernel on ties
        if best.is_none_or(|(_, c)| corr > c) {
            best = Some((k, corr));
        }
    }
    best
}

/// Chooses one kernel per signal from the weighted geometric mean of the
/// per-unit best kernels.
pub fn select_kernels(
    table: &TimeSeriesTable,
    signals: &[usize],
) -> Result<FilterPlan, PreprocessError> {
    if !table.is_labeled() {
        return Err(PreprocessError::Unlabeled);
    }
    let mut plan = FilterPlan::off();
    for &signal in signals {
        if signal >= SIGNAL_COUNT.min(table.feature_count()) {
            return Err(PreprocessError::SignalOutOfRange {
                index: signal,
                count: SIGNAL_COUNT.min(table.feature_count()),
            });
        }
        let (mut weighted_log, mut total_weight) = (0.0, 0.0);
        for span in table.units() {
            let values = table.unit_column(span, signal);
            let rul = table.unit_rul(span);
            if let Some((k, corr)) = best_unit_kernel(&values, &rul) {
                let w = kernel_weight(corr, span.len());
                weighted_log += w * (k as f64).ln();
                total_weight += w;
            }
        }
        let kernel = if total_weight > 0.0 {
            let k = round_to_odd((weighted_log / total_weight).exp());
            if k < 3 {
                1
            } else {
                k
            }
        } else {
            1
        };
        plan.set(signal, kernel)?;
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmapss::{label_train_rul, signal_labels, AgentId, Record};
    use proptest::prelude::*;

    /// Pads by clamping indices, then sorts each window.
    fn brute_median(signal: &[f64], kernel: usize) -> Vec<f64> {
        let n = signal.len() as isize;
        let h = (kernel / 2) as isize;
        (0..n)
            .map(|i| {
                let mut w: Vec<f64> = (i - h..=i + h)
                    .map(|j| signal[j.clamp(0, n - 1) as usize])
                    .collect();
                w.sort_by(f64::total_cmp);
                w[kernel / 2]
            })
            .collect()
    }

    #[test]
    fn spikes_removed() {
        assert_eq!(
            median_filter(&[1., 9., 1., 1., 9., 1.], 3).unwrap(),
            vec![1.; 6]
        );
        assert_eq!(brute_median(&[1., 9., 1., 1., 9., 1.], 3), vec![1.; 6]);
    }

    #[test]
    fn identity_cases() {
        let s = [3.0, -1.0, 2.5, 7.0];
        assert_eq!(median_filter(&s, 1).unwrap(), s.to_vec());
        assert_eq!(median_filter(&[4.2; 9], 7).unwrap(), vec![4.2; 9]);
        assert!(median_filter(&[], 5).unwrap().is_empty());
    }

    #[test]
    fn bad_kernels() {
        assert!(matches!(
            median_filter(&[1.0], 4),
            Err(PreprocessError::BadKernel(4))
        ));
        assert!(matches!(
            median_filter(&[1.0], 0),
            Err(PreprocessError::BadKernel(0))
        ));
    }

    proptest! {
        #[test]
        fn matches_window_sort(signal in prop::collection::vec(-100.0f64..100.0, 1..50), half in 0usize..6) {
            let k = 2 * half + 1;
            let out = median_filter(&signal, k).unwrap();
            prop_assert_eq!(&out, &brute_median(&signal, k));
            prop_assert!(out.iter().all(|v| signal.contains(v)));
        }

        #[test]
        fn monotone_is_fixed_point(mut signal in prop::collection::vec(-100.0f64..100.0, 1..40)) {
            signal.sort_by(f64::total_cmp);
            let once = median_filter(&signal, 3).unwrap();
            prop_assert_eq!(&once, &signal);
            prop_assert_eq!(median_filter(&once, 3).unwrap(), once);
        }
    }

    #[test]
    fn candidates() {
        assert_eq!(candidate_kernels(100), vec![3, 5, 7, 9]);
        assert_eq!(candidate_kernels(110), vec![3, 5, 7, 9, 11]);
        assert!(candidate_kernels(25).is_empty());
        assert!(candidate_kernels(29).is_empty());
        assert_eq!(candidate_kernels(30), vec![3]);
    }

    #[test]
    fn odd_rounding() {
        assert_eq!(round_to_odd(3.0), 3);
        assert_eq!(round_to_odd(3.9), 3);
        assert_eq!(round_to_odd(4.0), 5);
        assert_eq!(round_to_odd(4.1), 5);
        assert_eq!(round_to_odd(6.2), 7);
        assert_eq!(round_to_odd(1.0), 1);
    }

    fn single_signal_table(units: &[Vec<f64>]) -> TimeSeriesTable {
        let mut rows = Vec::new();
        for (u, values) in units.iter().enumerate() {
            for (c, &v) in values.iter().enumerate() {
                let mut features = vec![0.0; 24];
                features[5] = v;
                rows.push(Record {
                    unit: u as u32 + 1,
                    cycle: c as u32 + 1,
                    features,
                    rul: None,
                });
            }
        }
        label_train_rul(&TimeSeriesTable::new(AgentId::Fd001, signal_labels(), rows).unwrap())
    }

    #[test]
    fn signal_equal_to_rul_ties_to_smallest() {
        let rul: Vec<f64> = (0..100).rev().map(f64::from).collect();
        let table = single_signal_table(std::slice::from_ref(&rul));
        // exhaustive oracle: every candidate leaves a linear signal untouched
        for k in candidate_kernels(100) {
            assert_eq!(median_filter(&rul, k).unwrap(), rul);
        }
        let plan = select_kernels(&table, &[5]).unwrap();
        assert_eq!(plan.kernel(5), 3);
    }

    #[test]
    fn short_units_are_skipped() {
        let table = single_signal_table(&[(0..25).map(f64::from).collect()]);
        assert_eq!(
            best_unit_kernel(&table.column(5), &table.unit_rul(&table.units()[0])),
            None
        );
        assert_eq!(select_kernels(&table, &[5]).unwrap().kernel(5), 1);
    }

    #[test]
    fn constant_signal_gets_no_filter() {
        let table = single_signal_table(&[vec![2.0; 80]]);
        assert_eq!(select_kernels(&table, &[5]).unwrap().kernel(5), 1);
    }

    #[test]
    fn geometric_mean_of_unit_votes() {
        // two noisy units; recompute the vote by hand from best_unit_kernel
        let noisy = |n: usize, phase: f64| -> Vec<f64> {
            (0..n)
                .map(|i| (n - 1 - i) as f64 + 30.0 * ((i as f64) * 2.3 + phase).sin())
                .collect()
        };
        let units = vec![noisy(120, 0.0), noisy(90, 1.0)];
        let table = single_signal_table(&units);
        let mut num = 0.0;
        let mut den = 0.0;
        for (span, values) in table.units().iter().zip(&units) {
            let (k, c) = best_unit_kernel(values, &table.unit_rul(span)).unwrap();
            num += c * values.len() as f64 * (k as f64).ln();
            den += c * values.len() as f64;
        }
        let expected = round_to_odd((num / den).exp());
        assert_eq!(select_kernels(&table, &[5]).unwrap().kernel(5), expected);
        assert!(select_kernels(&table, &[24]).is_err());
    }

    #[test]
    fn plan_applies_within_units() {
        let table = single_signal_table(&[vec![1., 9., 1.], vec![9., 1., 9.]]);
        let plan = FilterPlan::from_kernels([(5, 3)]).unwrap();
        let out = plan.apply(&table);
        // a unit-crossing filter would pull unit 2's first value toward unit 1
        assert_eq!(out.column(5), vec![1., 1., 1., 9., 9., 9.]);
        assert!(FilterPlan::from_kernels([(5, 2)]).is_err());
    }
}
