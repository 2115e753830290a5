use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use super::metrics::{is_constant, mean, sample_std};
use super::{StatsError, StudentT};

/// Null hypothesis of a one-sample t-test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullHypothesis {
    /// `mu = mu0`, two-sided alternative.
    Equal,
    /// `mu <= mu0`, alternative `mu > mu0`.
    AtMost,
    /// `mu >= mu0`, alternative `mu < mu0`.
    AtLeast,
}

impl NullHypothesis {
    pub fn symbol(self) -> &'static str {
        match self {
            NullHypothesis::Equal => "=",
            NullHypothesis::AtMost => "<=",
            NullHypothesis::AtLeast => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub null: NullHypothesis,
    pub mu0: f64,
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
}

impl fmt::Display for TTestResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "H0: mu {} {} | t = {:.4}, df = {}, p = {:.6} -> {}",
            self.null.symbol(),
            self.mu0,
            self.t,
            self.df,
            self.p_value,
            if self.reject {
                "reject"
            } else {
                "fail to reject"
            }
        )
    }
}

fn check_sample(sample: &[f64]) -> Result<(), StatsError> {
    if sample.len() < 2 {
        return Err(StatsError::TooFewSamples {
            n: sample.len(),
            needed: 2,
        });
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// One-sample Student t-test with Bessel-corrected standard deviation.
pub fn t_test_one_sample(
    sample: &[f64],
    mu0: f64,
    null: NullHypothesis,
    alpha: f64,
) -> Result<TTestResult, StatsError> {
    check_sample(sample)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::BadProbability(alpha));
    }
    if is_constant(sample) {
        return Err(StatsError::ZeroVariance);
    }
    let n = sample.len();
    let t = (mean(sample) - mu0) / (sample_std(sample) / (n as f64).sqrt());
    let dist = StudentT::new((n - 1) as f64).expect("n >= 2");
    let p_value = match null {
        NullHypothesis::Equal => (2.0 * dist.cdf(-t.abs())).min(1.0),
        NullHypothesis::AtMost => dist.sf(t),
        NullHypothesis::AtLeast => dist.cdf(t),
    };
    Ok(TTestResult {
        null,
        mu0,
        t,
        df: n - 1,
        p_value,
        alpha,
        reject: p_value < alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub level: f64,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Two-sided t interval for the mean: `mean ± t_{(1+level)/2, n-1} · s/√n`.
pub fn confidence_interval(sample: &[f64], level: f64) -> Result<ConfidenceInterval, StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::BadProbability(level));
    }
    check_sample(sample)?;
    let n = sample.len() as f64;
    let m = mean(sample);
    let q = StudentT::new(n - 1.0)
        .expect("n >= 2")
        .quantile((1.0 + level) / 2.0);
    let half = q * sample_std(sample) / n.sqrt();
    Ok(ConfidenceInterval {
        level,
        mean: m,
        lower: m - half,
        upper: m + half,
    })
}

/// A published reference mean error to test against.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub study: String,
    pub mu0: f64,
}

impl Baseline {
    pub fn new(study: impl Into<String>, mu0: f64) -> Self {
        Self {
            study: study.into(),
            mu0,
        }
    }
}

/// Reference mean errors of the five prior studies the federated model is compared against.
pub fn reference_baselines() -> Vec<Baseline> {
    vec![
        Baseline::new("13", 18.44),
        Baseline::new("3", 18.86),
        Baseline::new("5", 19.24),
        Baseline::new("10", 19.29),
        Baseline::new("2", 21.24),
    ]
}

/// Both one-sided tests of one error series against one baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub series: String,
    pub study: String,
    pub at_most: TTestResult,
    pub at_least: TTestResult,
}

pub fn compare_models(
    errors: &BTreeMap<String, Vec<f64>>,
    baselines: &[Baseline],
    alpha: f64,
) -> Result<Vec<Comparison>, StatsError> {
    let mut out = Vec::with_capacity(errors.len() * baselines.len());
    for (series, sample) in errors {
        for b in baselines {
            out.push(Comparison {
                series: series.clone(),
                study: b.study.clone(),
                at_most: t_test_one_sample(sample, b.mu0, NullHypothesis::AtMost, alpha)?,
                at_least: t_test_one_sample(sample, b.mu0, NullHypothesis::AtLeast, alpha)?,
            });
        }
    }
    Ok(out)
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "Yes"
    } else {
        "No"
    }
}

/// Comparison table as csv.
pub fn comparisons_csv(rows: &[Comparison]) -> String {
    let mut out =
        String::from("series,study,mu0,t,df,p_at_most,reject_at_most,p_at_least,reject_at_least\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.series,
            r.study,
            r.at_most.mu0,
            r.at_most.t,
            r.at_most.df,
            r.at_most.p_value,
            yes_no(r.at_most.reject),
            r.at_least.p_value,
            yes_no(r.at_least.reject)
        );
    }
    out
}

/// Comparison table as aligned text: study, null hypothesis, t, reject decision.
pub fn comparisons_text(rows: &[Comparison]) -> String {
    let mut out = format!(
        "{:<12} {:<8} {:<16} {:>10} {:>12} {:>8} {:>12} {:>8}\n",
        "Series", "Study #", "Null Hyp. (H0)", "t", "p (<=)", "Reject?", "p (>=)", "Reject?"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<12} {:<8} {:<16} {:>10.2} {:>12.8} {:>8} {:>12.8} {:>8}",
            r.series,
            r.study,
            format!("mu <= {}", r.at_most.mu0),
            r.at_most.t,
            r.at_most.p_value,
            yes_no(r.at_most.reject),
            r.at_least.p_value,
            yes_no(r.at_least.reject)
        );
    }
    out
}

pub fn intervals_csv(rows: &[(String, ConfidenceInterval)]) -> String {
    let mut out = String::from("series,level,mean,lower,upper\n");
    for (name, ci) in rows {
        let _ = writeln!(
            out,
            "{name},{},{},{},{}",
            ci.level, ci.mean, ci.lower, ci.upper
        );
    }
    out
}

pub fn intervals_text(rows: &[(String, ConfidenceInterval)]) -> String {
    let mut out = format!(
        "{:<12} {:>12} {:>12}\n",
        "Agent Name", "Lower Bound", "Upper Bound"
    );
    for (name, ci) in rows {
        let _ = writeln!(out, "{name:<12} {:>12.2} {:>12.2}", ci.lower, ci.upper);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn large_negative_t_fails_to_reject_at_most() {
        let r = t_test_one_sample(&[10., 12., 14.], 18.44, NullHypothesis::AtMost, 0.05).unwrap();
        // (12 - 18.44) / (2 / sqrt 3)
        assert_abs_diff_eq!(r.t, -6.44 / (2.0 / 3f64.sqrt()), epsilon = 1e-12);
        assert_abs_diff_eq!(r.t, -5.577, epsilon = 1e-3);
        assert_eq!(r.df, 2);
        assert!(!r.reject);
        assert!(r.p_value > 0.95);
    }

    #[test]
    fn null_case() {
        let r = t_test_one_sample(&[1., 2., 3.], 2.0, NullHypothesis::Equal, 0.05).unwrap();
        assert_eq!(r.t, 0.0);
        assert_abs_diff_eq!(r.p_value, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn two_sided_p() {
        let r = t_test_one_sample(&[1., 2., 3.], 0.0, NullHypothesis::Equal, 0.05).unwrap();
        assert_abs_diff_eq!(r.t, 12f64.sqrt(), epsilon = 1e-12);
        // df = 2 closed form: p = 1 - t / sqrt(2 + t^2)
        assert_abs_diff_eq!(
            r.p_value,
            1.0 - r.t / (2.0 + r.t * r.t).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(r.p_value, 0.0742, epsilon = 1e-3);
    }

    #[test]
    fn one_sided_p_values_sum_to_one() {
        let s = [3.1, 4.7, 2.2, 5.9, 4.4];
        for mu0 in [-3.0, 0.0, 3.9, 4.06, 10.0] {
            let a = t_test_one_sample(&s, mu0, NullHypothesis::AtMost, 0.05).unwrap();
            let b = t_test_one_sample(&s, mu0, NullHypothesis::AtLeast, 0.05).unwrap();
            assert_abs_diff_eq!(a.p_value + b.p_value, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn t_test_errors() {
        assert!(matches!(
            t_test_one_sample(&[1.0], 0.0, NullHypothesis::Equal, 0.05),
            Err(StatsError::TooFewSamples { n: 1, .. })
        ));
        assert!(matches!(
            t_test_one_sample(&[2.0, 2.0], 0.0, NullHypothesis::Equal, 0.05),
            Err(StatsError::ZeroVariance)
        ));
    }

    #[test]
    fn interval_example() {
        let ci = confidence_interval(&[10., 12., 14.], 0.95).unwrap();
        assert_abs_diff_eq!(ci.lower, 7.032, epsilon = 1e-2);
        assert_abs_diff_eq!(ci.upper, 16.968, epsilon = 1e-2);
        assert!(confidence_interval(&[1., 2.], 1.0).is_err());
        assert!(confidence_interval(&[1., 2.], 0.0).is_err());
    }

    #[test]
    fn interval_nesting() {
        let s = [4.0, 4.2, 3.7, 4.9, 4.4, 3.8];
        let wide = confidence_interval(&s, 0.99).unwrap();
        let narrow = confidence_interval(&s, 0.90).unwrap();
        assert!(wide.lower < narrow.lower && wide.upper > narrow.upper);
        assert!(narrow.lower <= narrow.mean && narrow.mean <= narrow.upper);
    }

    #[test]
    fn comparison_table_shape() {
        let mut errors = BTreeMap::new();
        errors.insert("Aggregated".to_string(), vec![9.0, 10.0, 11.0, 10.5]);
        let rows = compare_models(&errors, &reference_baselines(), 0.05).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| !r.at_most.reject && r.at_least.reject));
        assert_eq!(comparisons_csv(&rows).lines().count(), 6);
        assert!(compare_models(&errors, &[], 0.05).unwrap().is_empty());
    }
}
