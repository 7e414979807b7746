use crate::error::{Error, Result};

/// Standard Gumbel draw by inverse CDF, `-ln(-ln U)`, with `U` kept strictly
/// inside `(0, 1)`.
pub fn gumbel<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    -(-u.ln()).ln()
}

/// Picks `argmax_k (utilities[k] + G_k)` with independent standard Gumbel
/// noise, so alternative `k` is chosen with probability
/// `exp(u_k) / sum_j exp(u_j)`. Ties go to the lowest index.
pub fn sample_gumbel_choice<R: rand::Rng + ?Sized>(
    utilities: &[f64],
    rng: &mut R,
) -> Result<usize> {
    if utilities.is_empty() {
        return Err(Error::EmptyChoiceSet);
    }
    if utilities.iter().any(|u| !u.is_finite()) {
        return Err(Error::InvalidConfig("utilities must be finite".into()));
    }
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (k, &u) in utilities.iter().enumerate() {
        let v = u + gumbel(rng);
        if v > best_value {
            best = k;
            best_value = v;
        }
    }
    Ok(best)
}

/// Closed-form multinomial-logit choice probabilities.
pub fn logit_probabilities(utilities: &[f64]) -> Vec<f64> {
    let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = utilities.iter().map(|u| (u - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
