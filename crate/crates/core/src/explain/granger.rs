use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::stats::f_survival;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrangerResult {
    pub f_statistic: f64,
    pub p_value: f64,
    pub lag: usize,
    pub rss_restricted: f64,
    pub rss_unrestricted: f64,
    pub df_num: usize,
    pub df_den: usize,
    pub alpha: f64,
    /// Whether "x does not Granger-cause y" is rejected at `alpha`.
    pub reject: bool,
}

/// Shortest series accepted for lag `p`: the `T - p` usable observations must
/// leave at least one residual degree of freedom after the `2p + 1`
/// unrestricted coefficients.
pub fn granger_min_len(lag: usize) -> usize {
    3 * lag + 2
}

fn designs(x: &[f64], y: &[f64], lag: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let t = y.len();
    let mut restricted = Vec::with_capacity((t - lag) * (lag + 1));
    let mut unrestricted = Vec::with_capacity((t - lag) * (2 * lag + 1));
    let mut target = Vec::with_capacity(t - lag);
    for s in lag..t {
        restricted.push(1.0);
        unrestricted.push(1.0);
        for k in 1..=lag {
            restricted.push(y[s - k]);
            unrestricted.push(y[s - k]);
        }
        for k in 1..=lag {
            unrestricted.push(x[s - k]);
        }
        target.push(y[s]);
    }
    (restricted, unrestricted, target)
}

/// F test of whether lags of `x` improve an autoregression of `y`.
///
/// Both models are fitted by least squares on the `n = T - p` observations
/// that have a full lag history. With `F = ((RSS_r - RSS_u)/p) / (RSS_u/(n - 2p - 1))`
/// the p-value is the upper F(p, n - 2p - 1) tail.
pub fn granger_test(x: &[f64], y: &[f64], lag: usize, alpha: f64) -> Result<GrangerResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if lag == 0 {
        return Err(Error::InvalidConfig(
            "Granger lag order must be at least 1".into(),
        ));
    }
    let needed = granger_min_len(lag);
    if y.len() < needed {
        return Err(Error::SeriesTooShort {
            len: y.len(),
            needed,
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("series must be finite".into()));
    }
    let (restricted, unrestricted, target) = designs(x, y, lag);
    let (_, rss_r) = least_squares(&restricted, lag + 1, &target)?;
    let (_, rss_u) = least_squares(&unrestricted, 2 * lag + 1, &target)?;
    let n = target.len();
    let df_den = n - 2 * lag - 1;
    let f = if rss_u > 0.0 {
        (((rss_r - rss_u) / lag as f64) / (rss_u / df_den as f64)).max(0.0)
    } else if rss_r > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let p_value = if f.is_infinite() {
        0.0
    } else {
        f_survival(f, lag as f64, df_den as f64)
    };
    Ok(GrangerResult {
        f_statistic: f,
        p_value,
        lag,
        rss_restricted: rss_r,
        rss_unrestricted: rss_u,
        df_num: lag,
        df_den,
        alpha,
        reject: p_value < alpha,
    })
}

/// Lag order in `1..=max_lag` minimizing the BIC of the unrestricted model,
/// each fitted on the common sample `t >= max_lag` so the criteria compare.
pub fn granger_select_lag(x: &[f64], y: &[f64], max_lag: usize) -> Result<usize> {
    if max_lag == 0 {
        return Err(Error::InvalidConfig(
            "maximum lag must be at least 1".into(),
        ));
    }
    let needed = granger_min_len(max_lag);
    if y.len() < needed || x.len() != y.len() {
        return Err(Error::SeriesTooShort {
            len: y.len().min(x.len()),
            needed,
        });
    }
    let mut best = (1, f64::INFINITY);
    for lag in 1..=max_lag {
        let skip = max_lag - lag;
        let (_, unrestricted, target) = designs(&x[skip..], &y[skip..], lag);
        let k = 2 * lag + 1;
        let (_, rss) = least_squares(&unrestricted, k, &target)?;
        let n = target.len() as f64;
        let bic = n * (rss.max(f64::MIN_POSITIVE) / n).ln() + k as f64 * n.ln();
        if bic < best.1 {
            best = (lag, bic);
        }
    }
    Ok(best.0)
}

/// Writes `x,y,p_value,f_statistic,decision` rows.
pub fn write_granger_table<W: std::io::Write>(
    rows: &[(String, String, GrangerResult)],
    mut sink: W,
) -> Result<()> {
    writeln!(sink, "x,y,p_value,f_statistic,decision")?;
    for (x, y, r) in rows {
        let decision = if r.reject { "reject" } else { "fail_to_reject" };
        writeln!(
            sink,
            "{x},{y},{:.6e},{:.6},{decision}",
            r.p_value, r.f_statistic
        )?;
    }
    Ok(())
}
