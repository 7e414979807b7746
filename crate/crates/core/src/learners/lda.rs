use crate::error::{Error, Result};
use crate::linalg::{dot, solve_spd};

pub(crate) struct LdaFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Ridge added to the pooled covariance diagonal, zero when none was needed.
    pub ridge: f64,
}

/// Two-class linear discriminant with pooled covariance `S`:
/// `w = S^-1 (m1 - m0)`, `b = -w.(m1 + m0)/2 + ln(pi1/pi0)`, so that
/// `sigmoid(w.x + b)` is the posterior under shared-covariance Gaussians.
///
/// When `S` is not positive definite a ridge of `1e-8 * trace(S)/p` is added,
/// growing tenfold until the Cholesky factorization succeeds.
pub(crate) fn fit_lda(x: &[f64], n: usize, p: usize, y: &[u8]) -> Result<LdaFit> {
    let mut means = [vec![0.0; p], vec![0.0; p]];
    let mut counts = [0usize; 2];
    for i in 0..n {
        let c = usize::from(y[i] != 0);
        counts[c] += 1;
        for (m, v) in means[c].iter_mut().zip(&x[i * p..(i + 1) * p]) {
            *m += v;
        }
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass);
    }
    for c in 0..2 {
        means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
    }
    let mut s = vec![0.0; p * p];
    for i in 0..n {
        let c = usize::from(y[i] != 0);
        let d: Vec<f64> = x[i * p..(i + 1) * p]
            .iter()
            .zip(&means[c])
            .map(|(v, m)| v - m)
            .collect();
        for a in 0..p {
            for b in 0..p {
                s[a * p + b] += d[a] * d[b];
            }
        }
    }
    let dof = (n as f64 - 2.0).max(1.0);
    s.iter_mut().for_each(|v| *v /= dof);
    let diff: Vec<f64> = means[1].iter().zip(&means[0]).map(|(a, b)| a - b).collect();

    let trace = (0..p).map(|j| s[j * p + j]).sum::<f64>() / p as f64;
    let mut ridge = 0.0;
    let mut base = 1e-8 * if trace > 0.0 { trace } else { 1.0 };
    let weights = loop {
        let mut a = s.clone();
        for j in 0..p {
            a[j * p + j] += ridge;
        }
        if let Some(w) = solve_spd(&a, p, &diff) {
            if w.iter().all(|v| v.is_finite()) {
                break w;
            }
        }
        if ridge > 1e6 * base.max(1.0) {
            return Err(Error::SingularCovariance);
        }
        ridge = base;
        base *= 10.0;
    };
    let mid: Vec<f64> = means[1]
        .iter()
        .zip(&means[0])
        .map(|(a, b)| (a + b) / 2.0)
        .collect();
    let bias = -dot(&weights, &mid) + (counts[1] as f64 / counts[0] as f64).ln();
    Ok(LdaFit {
        weights,
        bias,
        ridge,
    })
}
