use std::collections::HashMap;

use crate::error::{Error, Result};

/// Equal-width bin codes over `[min, max]`; a constant column maps to bin 0.
pub fn discretize(x: &[f64], bins: usize) -> Vec<usize> {
    let bins = bins.max(1);
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let width = (hi - lo) / bins as f64;
    x.iter()
        .map(|&v| {
            if !(width > 0.0) {
                0
            } else {
                (((v - lo) / width) as usize).min(bins - 1)
            }
        })
        .collect()
}

/// Plug-in mutual information (nats) between two discrete code vectors.
pub fn discrete_mutual_information(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len() as f64;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut ma: HashMap<usize, usize> = HashMap::new();
    let mut mb: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ma.entry(x).or_default() += 1;
        *mb.entry(y).or_default() += 1;
    }
    // sort cells so the floating-point sum does not depend on hash order
    let mut cells: Vec<_> = joint.into_iter().collect();
    cells.sort_unstable();
    let mi: f64 = cells
        .into_iter()
        .map(|((x, y), c)| {
            let c = c as f64;
            c / n * (c * n / (ma[&x] as f64 * mb[&y] as f64)).ln()
        })
        .sum();
    Ok(mi.max(0.0))
}

/// Plug-in entropy (nats) of a code vector.
pub fn entropy(a: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &x in a {
        *counts.entry(x).or_default() += 1;
    }
    let mut c: Vec<usize> = counts.into_values().collect();
    c.sort_unstable();
    -c.into_iter()
        .map(|k| k as f64 / n * (k as f64 / n).ln())
        .sum::<f64>()
}

/// Mutual information of `x` and `y` after equal-width binning of both into
/// `bins` bins.
pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewRows {
            rows: x.len(),
            needed: 2,
        });
    }
    // symmetric by construction: I(a; b) sums the same cells as I(b; a)
    let (a, b) = (discretize(x, bins), discretize(y, bins));
    let (first, second) = if (x, y) <= (y, x) { (a, b) } else { (b, a) };
    discrete_mutual_information(&first, &second)
}

/// Mutual information between the joint bin of several columns and `y`.
pub fn joint_mutual_information(xs: &[&[f64]], y: &[f64], bins: usize) -> Result<f64> {
    let n = y.len();
    if let Some(x) = xs.iter().find(|x| x.len() != n) {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: n,
        });
    }
    let mut codes = vec![0usize; n];
    for x in xs {
        for (c, d) in codes.iter_mut().zip(discretize(x, bins)) {
            *c = *c * bins.max(1) + d;
        }
    }
    discrete_mutual_information(&codes, &discretize(y, bins))
}
