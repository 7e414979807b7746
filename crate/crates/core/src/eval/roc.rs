use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
}

impl RocResult {
    /// Trapezoidal area under `points`.
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum()
    }

    /// Writes the curve as `fpr,tpr` lines.
    pub fn write_csv<W: std::io::Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "fpr,tpr")?;
        for (f, t) in &self.points {
            writeln!(sink, "{f},{t}")?;
        }
        Ok(())
    }
}

/// ROC curve and AUC, with tied scores counted as half-concordant.
///
/// Sweeping thresholds from the highest score down and moving diagonally
/// across each group of tied scores makes the trapezoidal area equal to the
/// Mann-Whitney pair count.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<RocResult> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidConfig("scores contain NaN".into()));
    }
    let positives = labels.iter().filter(|&&l| l != 0).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (np, nn) = (positives as f64, negatives as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    // concordant + 0.5 * tied, accumulated in integer halves to stay exact
    let mut twice_pairs: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut group_tp, mut group_fp) = (0usize, 0usize);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] != 0 {
                group_tp += 1;
            } else {
                group_fp += 1;
            }
            i += 1;
        }
        // negatives in this group lose to all earlier positives and tie with
        // this group's positives
        twice_pairs += group_fp as u128 * (2 * tp as u128 + group_tp as u128);
        tp += group_tp;
        fp += group_fp;
        points.push((fp as f64 / nn, tp as f64 / np));
    }
    let auc = twice_pairs as f64 / (2.0 * np * nn);
    Ok(RocResult {
        points,
        auc,
        positives,
        negatives,
    })
}
