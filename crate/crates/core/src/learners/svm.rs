use crate::linalg::dot;

pub(crate) struct SvmFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
}

fn objective(x: &[f64], n: usize, p: usize, y: &[f64], w: &[f64], b: f64, lambda: f64) -> f64 {
    let hinge: f64 = (0..n)
        .map(|i| (1.0 - y[i] * (dot(&x[i * p..(i + 1) * p], w) + b)).max(0.0))
        .sum();
    0.5 * lambda * dot(w, w) + hinge / n as f64
}

/// Linear SVM `lambda/2 ||w||^2 + mean hinge` by full-batch subgradient
/// descent with step `1/(lambda t)` and projection onto the ball of radius
/// `1/sqrt(lambda)` that contains the optimum. Returns the best iterate seen.
/// Labels are `+1 / -1`.
pub(crate) fn fit_svm(
    x: &[f64],
    n: usize,
    p: usize,
    y: &[f64],
    lambda: f64,
    iters: usize,
) -> SvmFit {
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut best = SvmFit {
        weights: w.clone(),
        bias: b,
        objective: objective(x, n, p, y, &w, b, lambda),
    };
    let radius = 1.0 / lambda.sqrt();
    for t in 1..=iters {
        let mut g: Vec<f64> = w.iter().map(|v| lambda * v).collect();
        let mut gb = 0.0;
        for i in 0..n {
            let row = &x[i * p..(i + 1) * p];
            if y[i] * (dot(row, &w) + b) < 1.0 {
                for (gj, xj) in g.iter_mut().zip(row) {
                    *gj -= y[i] * xj / n as f64;
                }
                gb -= y[i] / n as f64;
            }
        }
        let eta = 1.0 / (lambda * t as f64);
        w.iter_mut().zip(&g).for_each(|(wj, gj)| *wj -= eta * gj);
        b -= eta * gb;
        let norm = dot(&w, &w).sqrt();
        if norm > radius {
            w.iter_mut().for_each(|v| *v *= radius / norm);
        }
        b = b.clamp(-radius, radius);
        let obj = objective(x, n, p, y, &w, b, lambda);
        if obj < best.objective {
            best = SvmFit {
                weights: w.clone(),
                bias: b,
                objective: obj,
            };
        }
    }
    best
}
