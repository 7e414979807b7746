use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;

/// `sign(theta) * max(|theta| - lambda, 0)`.
pub fn soft_threshold(theta: f64, lambda: f64) -> f64 {
    if theta > lambda {
        theta - lambda
    } else if theta < -lambda {
        theta + lambda
    } else {
        0.0
    }
}

/// One neighborhood regression `min (1/2N)||y - X b||^2 + lambda ||b||_1`.
/// The design is stored by column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoProblem {
    pub response: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
    pub lambda: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl LassoProblem {
    pub fn new(response: Vec<f64>, columns: Vec<Vec<f64>>, lambda: f64) -> Self {
        Self {
            response,
            columns,
            lambda,
            tol: 1e-10,
            max_sweeps: 10_000,
        }
    }

    pub fn objective(&self, beta: &[f64]) -> f64 {
        let n = self.response.len() as f64;
        let r = self.residual(beta);
        dot(&r, &r) / (2.0 * n) + self.lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    fn residual(&self, beta: &[f64]) -> Vec<f64> {
        let mut r = self.response.clone();
        for (col, &b) in self.columns.iter().zip(beta) {
            if b != 0.0 {
                r.iter_mut().zip(col).for_each(|(ri, xi)| *ri -= b * xi);
            }
        }
        r
    }

    fn validate(&self) -> Result<()> {
        let n = self.response.len();
        if n < 2 {
            return Err(Error::TooFewRows { rows: n, needed: 2 });
        }
        if let Some(c) = self.columns.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch {
                left: n,
                right: c.len(),
            });
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda {} must be nonnegative",
                self.lambda
            )));
        }
        if self
            .response
            .iter()
            .chain(self.columns.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidConfig("lasso inputs must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub beta: Vec<f64>,
    pub sweeps: usize,
    /// Largest coefficient change in the final sweep.
    pub last_delta: f64,
    pub converged: bool,
    /// Objective before the first sweep and after each sweep.
    pub objective_trace: Vec<f64>,
}

impl LassoFit {
    pub fn ensure_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NonConvergence {
                iterations: self.sweeps,
                residual: self.last_delta,
            })
        }
    }
}

/// Cyclic coordinate descent from `beta = 0`.
///
/// With `rho_j = (1/N) <r + X_j b_j, X_j>` and `s_j = (1/N) ||X_j||^2`, each
/// coordinate moves to its exact minimizer `S_lambda(rho_j) / s_j`, which
/// keeps the objective nonincreasing. A sweep cap returns the last iterate
/// with `converged == false`.
pub fn lasso_cd(problem: &LassoProblem) -> Result<LassoFit> {
    lasso_cd_from(problem, None)
}

pub(crate) fn lasso_cd_from(problem: &LassoProblem, warm: Option<&[f64]>) -> Result<LassoFit> {
    problem.validate()?;
    let n = problem.response.len() as f64;
    let q = problem.columns.len();
    let mut beta = warm.map_or_else(|| vec![0.0; q], <[f64]>::to_vec);
    let scale: Vec<f64> = problem.columns.iter().map(|c| dot(c, c) / n).collect();
    let mut r = problem.residual(&beta);
    let mut trace = vec![problem.objective(&beta)];
    let mut sweeps = 0;
    let mut last_delta = 0.0;
    let mut converged = q == 0;
    while !converged && sweeps < problem.max_sweeps {
        last_delta = 0.0f64;
        for j in 0..q {
            let col = &problem.columns[j];
            let old = beta[j];
            let new = if scale[j] > 0.0 {
                let rho = dot(&r, col) / n + scale[j] * old;
                soft_threshold(rho, problem.lambda) / scale[j]
            } else {
                0.0
            };
            if new != old {
                let d = new - old;
                r.iter_mut().zip(col).for_each(|(ri, xi)| *ri -= d * xi);
                beta[j] = new;
                last_delta = last_delta.max(d.abs());
            }
        }
        sweeps += 1;
        trace.push(problem.objective(&beta));
        converged = last_delta < problem.tol;
    }
    if !converged {
        log::warn!("lasso stopped after {sweeps} sweeps, last change {last_delta:e}");
    }
    Ok(LassoFit {
        beta,
        sweeps,
        last_delta,
        converged,
        objective_trace: trace,
    })
}
