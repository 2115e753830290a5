use super::PreprocessError;
use crate::cmapss::TimeSeriesTable;
use crate::stats::is_constant;

/// Below this population std a feature is treated as constant and scaled to 0.
pub const MIN_STD: f64 = 1e-12;

/// Fitted z-score parameters (population convention) for a set of feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams {
    pub features: Vec<usize>,
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn fit_scaler(
    table: &TimeSeriesTable,
    features: &[usize],
) -> Result<ScalerParams, PreprocessError> {
    if table.is_empty() {
        return Err(PreprocessError::EmptyTable);
    }
    let mut params = ScalerParams {
        features: features.to_vec(),
        names: Vec::with_capacity(features.len()),
        mean: Vec::with_capacity(features.len()),
        std: Vec::with_capacity(features.len()),
    };
    let n = table.len() as f64;
    for &f in features {
        if f >= table.feature_count() {
            return Err(PreprocessError::SignalOutOfRange {
                index: f,
                count: table.feature_count(),
            });
        }
        let col = table.column(f);
        params.names.push(table.feature_names()[f].clone());
        if is_constant(&col) {
            // summation rounding would otherwise leave a spurious tiny std
            params.mean.push(col[0]);
            params.std.push(0.0);
            continue;
        }
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        params.mean.push(mean);
        params.std.push(var.sqrt());
    }
    Ok(params)
}

pub fn apply_scaler(
    table: &TimeSeriesTable,
    params: &ScalerParams,
) -> Result<TimeSeriesTable, PreprocessError> {
    for (&f, name) in params.features.iter().zip(&params.names) {
        if table.feature_names().get(f) != Some(name) {
            return Err(PreprocessError::FeatureMismatch {
                index: f,
                expected: name.clone(),
                found: table.feature_names().get(f).cloned(),
            });
        }
    }
    let mut out = table.clone();
    for row in out.rows_mut() {
        for (i, &f) in params.features.iter().enumerate() {
            let (m, s) = (params.mean[i], params.std[i]);
            row.features[f] = if s < MIN_STD {
                0.0
            } else {
                (row.features[f] - m) / s
            };
        }
    }
    Ok(out)
}

/// Fit on `table` and scale every feature column.
pub fn fit_all(table: &TimeSeriesTable) -> Result<ScalerParams, PreprocessError> {
    let all: Vec<usize> = (0..table.feature_count()).collect();
    fit_scaler(table, &all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmapss::synthetic::{generate, FleetSpec};
    use crate::cmapss::{signal_labels, AgentId, Record};
    use approx::assert_abs_diff_eq;

    fn table_with(values: &[f64]) -> TimeSeriesTable {
        let rows = values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let mut features = vec![5.0; 24];
                features[0] = v;
                Record {
                    unit: 1,
                    cycle: i as u32 + 1,
                    features,
                    rul: None,
                }
            })
            .collect();
        TimeSeriesTable::new(AgentId::Fd001, signal_labels(), rows).unwrap()
    }

    #[test]
    fn fit_examples() {
        let p = fit_scaler(&table_with(&[2., 4., 6.]), &[0, 1]).unwrap();
        assert_abs_diff_eq!(p.mean[0], 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.std[0], (8.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(p.std[0], 1.63299, epsilon = 1e-5);
        assert_eq!((p.mean[1], p.std[1]), (5.0, 0.0));
        let p = fit_scaler(&table_with(&[0., 2.]), &[0]).unwrap();
        assert_eq!((p.mean[0], p.std[0]), (1.0, 1.0));
    }

    #[test]
    fn apply_examples() {
        let t = table_with(&[2., 4., 6.]);
        let p = fit_scaler(&t, &[0, 1]).unwrap();
        let z = apply_scaler(&t, &p).unwrap();
        let col = z.column(0);
        assert_abs_diff_eq!(col[0], -1.2247, epsilon = 1e-4);
        assert_eq!(col[1], 0.0);
        assert_abs_diff_eq!(col[2], 1.2247, epsilon = 1e-4);
        assert_eq!(z.column(1), vec![0.0; 3]);
    }

    #[test]
    fn feature_mismatch() {
        let t = table_with(&[2., 4., 6.]);
        let mut p = fit_scaler(&t, &[0]).unwrap();
        p.names[0] = "SM99".into();
        assert!(matches!(
            apply_scaler(&t, &p),
            Err(PreprocessError::FeatureMismatch { .. })
        ));
        p.features[0] = 40;
        assert!(apply_scaler(&t, &p).is_err());
        let empty = t.select_units(&[]);
        assert!(matches!(
            fit_scaler(&empty, &[0]),
            Err(PreprocessError::EmptyTable)
        ));
    }

    #[test]
    fn standardizes_own_fit_data() {
        let t = generate(&FleetSpec::new(AgentId::Fd002, 6, 0, 5)).train;
        let p = fit_all(&t).unwrap();
        let z = apply_scaler(&t, &p).unwrap();
        for f in 0..z.feature_count() {
            let col = z.column(f);
            let n = col.len() as f64;
            let m = col.iter().sum::<f64>() / n;
            let s = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
            assert!(m.abs() < 1e-9, "feature {f} mean {m}");
            if p.std[f] >= MIN_STD {
                assert!((s - 1.0).abs() < 1e-9, "feature {f} std {s}");
            } else {
                assert_eq!(s, 0.0);
            }
        }
    }
}
