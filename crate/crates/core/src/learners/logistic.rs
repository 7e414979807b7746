use crate::linalg::dot;
use crate::stats::{sigmoid, softplus};

/// Outcome of a (possibly L1-penalized) logistic fit.
#[derive(Clone, Debug)]
pub(crate) struct LinearFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Penalized objective after every accepted step, starting at the initial point.
    #[cfg_attr(not(test), allow(dead_code))]
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    /// Infinity norm of the (proximal) gradient mapping at the returned point.
    pub grad_norm: f64,
    pub converged: bool,
}

struct Problem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    n: usize,
    p: usize,
}

impl Problem<'_> {
    fn margins(&self, w: &[f64], b: f64) -> Vec<f64> {
        (0..self.n)
            .map(|i| dot(&self.x[i * self.p..(i + 1) * self.p], w) + b)
            .collect()
    }

    /// Mean cross-entropy at precomputed margins.
    fn loss(&self, z: &[f64]) -> f64 {
        z.iter()
            .zip(self.y)
            .map(|(&z, &y)| softplus(z) - y * z)
            .sum::<f64>()
            / self.n as f64
    }

    fn gradient(&self, z: &[f64]) -> (Vec<f64>, f64) {
        let mut g = vec![0.0; self.p];
        let mut gb = 0.0;
        for i in 0..self.n {
            let r = sigmoid(z[i]) - self.y[i];
            gb += r;
            for (gj, xj) in g.iter_mut().zip(&self.x[i * self.p..(i + 1) * self.p]) {
                *gj += r * xj;
            }
        }
        let n = self.n as f64;
        g.iter_mut().for_each(|v| *v /= n);
        (g, gb / n)
    }
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Minimizes `mean cross-entropy + l1 * ||w||_1` (intercept unpenalized).
///
/// With `l1 = 0` this runs damped Newton steps; otherwise proximal gradient
/// descent with backtracking. Both accept a step only when the objective does
/// not increase.
pub(crate) fn fit_logistic(
    x: &[f64],
    n: usize,
    p: usize,
    y: &[f64],
    l1: f64,
    max_iters: usize,
    tol: f64,
    init: Option<(&[f64], f64)>,
) -> LinearFit {
    if l1 == 0.0 {
        fit_newton(x, n, p, y, max_iters, tol, init)
    } else {
        fit_proximal(x, n, p, y, l1, max_iters, tol, init)
    }
}

/// Newton's method on the unpenalized loss with Armijo backtracking. A tiny
/// ridge on the Hessian keeps the system solvable for separable data, where
/// the weights grow without bound until the iteration cap.
fn fit_newton(
    x: &[f64],
    n: usize,
    p: usize,
    y: &[f64],
    max_iters: usize,
    tol: f64,
    init: Option<(&[f64], f64)>,
) -> LinearFit {
    let prob = Problem { x, y, n, p };
    let (mut w, mut b) = match init {
        Some((w, b)) => (w.to_vec(), b),
        None => (vec![0.0; p], 0.0),
    };
    let mut z = prob.margins(&w, b);
    let mut f = prob.loss(&z);
    let mut trace = vec![f];
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let dim = p + 1;
    while iterations < max_iters {
        let (g, gb) = prob.gradient(&z);
        grad_norm = g
            .iter()
            .chain(std::iter::once(&gb))
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if grad_norm < tol {
            converged = true;
            break;
        }
        let mut h = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        for i in 0..n {
            let s = sigmoid(z[i]);
            let weight = s * (1.0 - s);
            if weight == 0.0 {
                continue;
            }
            let row = &x[i * p..(i + 1) * p];
            for a in 0..dim {
                let xa = if a < p { row[a] } else { 1.0 };
                for c in a..dim {
                    let xc = if c < p { row[c] } else { 1.0 };
                    h[(a, c)] += weight * xa * xc;
                }
            }
        }
        let inv_n = 1.0 / n as f64;
        for a in 0..dim {
            for c in a..dim {
                h[(a, c)] *= inv_n;
                h[(c, a)] = h[(a, c)];
            }
            h[(a, a)] += 1e-10;
        }
        let rhs =
            nalgebra::DVector::from_iterator(dim, g.iter().copied().chain(std::iter::once(gb)));
        let Some(direction) = h.cholesky().map(|c| c.solve(&rhs)) else {
            break;
        };
        let slope = -rhs.dot(&direction);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let w_new: Vec<f64> = w
                .iter()
                .enumerate()
                .map(|(j, wj)| wj - t * direction[j])
                .collect();
            let b_new = b - t * direction[p];
            let z_new = prob.margins(&w_new, b_new);
            let f_new = prob.loss(&z_new);
            if f_new <= f + 1e-4 * t * slope {
                w = w_new;
                b = b_new;
                z = z_new;
                f = f_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        trace.push(f);
        if !accepted {
            // rounding-level progress only
            break;
        }
    }
    LinearFit {
        weights: w,
        bias: b,
        objective_trace: trace,
        iterations,
        grad_norm,
        converged,
    }
}

fn fit_proximal(
    x: &[f64],
    n: usize,
    p: usize,
    y: &[f64],
    l1: f64,
    max_iters: usize,
    tol: f64,
    init: Option<(&[f64], f64)>,
) -> LinearFit {
    let prob = Problem { x, y, n, p };
    let (mut w, mut b) = match init {
        Some((w, b)) => (w.to_vec(), b),
        None => (vec![0.0; p], 0.0),
    };
    let penalty = |w: &[f64]| l1 * w.iter().map(|v| v.abs()).sum::<f64>();
    let mut z = prob.margins(&w, b);
    let mut f = prob.loss(&z);
    let mut trace = vec![f + penalty(&w)];
    let mut step: f64 = 1.0;
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut stalled = false;

    while iterations < max_iters {
        let (g, gb) = prob.gradient(&z);
        step = (step * 2.0).min(1e6);
        loop {
            let w_new: Vec<f64> = w
                .iter()
                .zip(&g)
                .map(|(wj, gj)| soft(wj - step * gj, step * l1))
                .collect();
            let b_new = b - step * gb;
            let z_new = prob.margins(&w_new, b_new);
            let f_new = prob.loss(&z_new);
            let dw: Vec<f64> = w_new.iter().zip(&w).map(|(a, c)| a - c).collect();
            let db = b_new - b;
            let model = f + dot(&g, &dw) + gb * db + (dot(&dw, &dw) + db * db) / (2.0 * step);
            if f_new <= model + 1e-15 * f.abs().max(1.0) || step < 1e-20 {
                grad_norm = dw
                    .iter()
                    .chain(std::iter::once(&db))
                    .fold(0.0f64, |m, v| m.max(v.abs()))
                    / step;
                let accept = f_new + penalty(&w_new) <= trace[trace.len() - 1];
                if accept {
                    w = w_new;
                    b = b_new;
                    z = z_new;
                    f = f_new;
                } else {
                    // rounding-level progress only
                    stalled = true;
                }
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        trace.push(f + penalty(&w));
        if grad_norm < tol {
            converged = true;
            break;
        }
        if stalled || step < 1e-20 {
            break;
        }
    }
    LinearFit {
        weights: w,
        bias: b,
        objective_trace: trace,
        iterations,
        grad_norm,
        converged,
    }
}
