use serde::{Deserialize, Serialize};

use super::{ColumnTag, FeatureMatrix};
use crate::error::{Error, Result};

/// Per-column affine standardization. Dummy columns keep mean 0 and std 1,
/// which makes the transform the identity on them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    /// Fits population means and standard deviations.
    pub fn fit(x: &FeatureMatrix) -> Result<Self> {
        let n = x.n_rows() as f64;
        if x.n_rows() == 0 {
            return Err(Error::EmptyTable);
        }
        let mut means = vec![0.0; x.n_cols()];
        let mut stds = vec![1.0; x.n_cols()];
        for (j, meta) in x.columns().iter().enumerate() {
            if meta.tag == ColumnTag::Dummy {
                continue;
            }
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let sd = var.sqrt();
            // relative threshold: variance lost to rounding is not real spread
            if !(sd > 1e-12 * m.abs().max(1.0)) {
                return Err(Error::ConstantColumn(meta.name.clone()));
            }
            means[j] = m;
            stds[j] = sd;
        }
        Ok(Self { means, stds })
    }

    fn check(&self, x: &FeatureMatrix) -> Result<()> {
        if x.n_cols() != self.means.len() {
            return Err(Error::ArityMismatch {
                expected: self.means.len(),
                found: x.n_cols(),
            });
        }
        Ok(())
    }

    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check(x)?;
        Ok(self.map(x, |v, m, s| (v - m) / s))
    }

    pub fn inverse(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check(x)?;
        Ok(self.map(x, |v, m, s| v * s + m))
    }

    /// Standardizes one raw row in place of a matrix.
    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    fn map(&self, x: &FeatureMatrix, f: impl Fn(f64, f64, f64) -> f64) -> FeatureMatrix {
        let p = x.n_cols();
        let values = x
            .values()
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let j = k % p;
                if x.columns()[j].tag == ColumnTag::Dummy {
                    v
                } else {
                    f(v, self.means[j], self.stds[j])
                }
            })
            .collect();
        FeatureMatrix::from_parts_unchecked(
            values,
            x.n_rows(),
            x.columns().to_vec(),
            x.target().map(<[u8]>::to_vec),
        )
    }
}

/// Centers and scales every non-dummy column to mean 0 and population std 1.
pub fn standardize(x: &FeatureMatrix) -> Result<(FeatureMatrix, Scaler)> {
    let scaler = Scaler::fit(x)?;
    Ok((scaler.transform(x)?, scaler))
}
