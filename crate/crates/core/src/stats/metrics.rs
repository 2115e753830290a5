use super::StatsError;

/// Regression scores of a prediction vector against its targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub n: usize,
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    /// `None` when the targets have zero variance.
    pub r_squared: Option<f64>,
}

pub fn compute_metrics(pred: &[f64], target: &[f64]) -> Result<MetricReport, StatsError> {
    if pred.len() != target.len() {
        return Err(StatsError::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(StatsError::TooFewSamples { n: 0, needed: 1 });
    }
    let n = pred.len() as f64;
    let sse: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    let sae: f64 = pred.iter().zip(target).map(|(p, y)| (p - y).abs()).sum();
    let mean = target.iter().sum::<f64>() / n;
    let sst: f64 = target.iter().map(|y| (mean - y) * (mean - y)).sum();
    let mse = sse / n;
    Ok(MetricReport {
        n: pred.len(),
        mse,
        rmse: mse.sqrt(),
        mae: sae / n,
        r_squared: (sst > 0.0).then(|| 1.0 - sse / sst),
    })
}

/// Pearson correlation; `None` for fewer than two points or a constant input.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 || is_constant(x) || is_constant(y) {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Exact comparison: a column of repeated literals must not pick up rounding variance.
pub fn is_constant(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] == w[1])
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Bessel-corrected standard deviation.
pub fn sample_std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}
