use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::StatTestResult;
use crate::error::{Error, Result};
use crate::Rng;

/// Dynamic time warping distance with absolute-difference cost and no window
/// constraint. The total path cost is returned without length normalization.
pub fn dtw(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySeries);
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &x in a {
        curr[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j - 1].min(prev[j]).min(curr[j - 1]);
            curr[j] = (x - b[j - 1]).abs() + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m])
}

/// How each permutation draw rearranges the two series.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationScheme {
    /// Shuffle the time order of each series independently.
    #[default]
    WithinSeries,
    /// At each time index swap the two series' values with probability one half.
    CrossSwap,
}

/// Permutation test of DTW similarity between an original and a generated
/// series. The p-value is the raw fraction of permuted DTW scores that are at
/// most the observed one, so a small p means the observed alignment is closer
/// than almost any shuffled pair.
pub fn dtw_permutation_test(
    original: &[f64],
    generated: &[f64],
    n_perm: usize,
    scheme: PermutationScheme,
    rng: &mut Rng,
) -> Result<StatTestResult> {
    let observed = dtw(original, generated)?;
    if n_perm == 0 {
        return Err(Error::InvalidConfig(
            "at least one permutation is required".into(),
        ));
    }
    let mut a = original.to_vec();
    let mut b = generated.to_vec();
    let mut at_most = 0usize;
    for _ in 0..n_perm {
        a.copy_from_slice(original);
        b.copy_from_slice(generated);
        match scheme {
            PermutationScheme::WithinSeries => {
                a.shuffle(rng);
                b.shuffle(rng);
            }
            PermutationScheme::CrossSwap => {
                for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                    if rng.random::<bool>() {
                        std::mem::swap(x, y);
                    }
                }
            }
        }
        if dtw(&a, &b)? <= observed {
            at_most += 1;
        }
    }
    Ok(StatTestResult {
        statistic: observed,
        p_value: at_most as f64 / n_perm as f64,
        mean_before: crate::stats::mean(original),
        mean_after: crate::stats::mean(generated),
        delta_percent: None,
        n_before: original.len(),
        n_after: generated.len(),
        df: None,
    })
}
