use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, sample_variance, student_t_two_sided};

/// Outcome of a two-sample comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub mean_before: f64,
    pub mean_after: f64,
    /// `100 (before - after) / before`, absent when the before mean is zero.
    pub delta_percent: Option<f64>,
    pub n_before: usize,
    pub n_after: usize,
    pub df: Option<f64>,
}

/// Percentage reduction from `before` to `after`.
pub fn delta_percent(before: f64, after: f64) -> Option<f64> {
    (before != 0.0).then(|| 100.0 * (before - after) / before)
}

/// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of
/// freedom and a two-sided p-value.
pub fn two_sample_ttest(before: &[f64], after: &[f64]) -> Result<StatTestResult> {
    if let Some(n) = [before.len(), after.len()].into_iter().find(|&n| n < 2) {
        return Err(Error::SampleTooSmall(n));
    }
    let (m1, m2) = (mean(before), mean(after));
    let (n1, n2) = (before.len() as f64, after.len() as f64);
    let (q1, q2) = (sample_variance(before) / n1, sample_variance(after) / n2);
    let se2 = q1 + q2;
    if se2 <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let t = (m1 - m2) / se2.sqrt();
    let df = se2 * se2 / (q1 * q1 / (n1 - 1.0) + q2 * q2 / (n2 - 1.0));
    Ok(StatTestResult {
        statistic: t,
        p_value: student_t_two_sided(t, df),
        mean_before: m1,
        mean_after: m2,
        delta_percent: delta_percent(m1, m2),
        n_before: before.len(),
        n_after: after.len(),
        df: Some(df),
    })
}
