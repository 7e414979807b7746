use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Rng;

/// Per-fold validation scores of one cross-validation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub fold_scores: Vec<f64>,
    pub mean: f64,
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin,
/// continuing the deal across classes so fold sizes differ by at most one.
/// Fails when any fold would miss a class.
pub fn stratified_folds(labels: &[u8], k: usize, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::FoldTooSmall {
            folds: k,
            detail: "at least two folds are required".into(),
        });
    }
    if k > labels.len() {
        return Err(Error::FoldTooSmall {
            folds: k,
            detail: format!("only {} rows", labels.len()),
        });
    }
    let mut folds = vec![Vec::new(); k];
    let mut slot = 0;
    for class in [0u8, 1] {
        let mut rows: Vec<usize> = (0..labels.len())
            .filter(|&i| u8::from(labels[i] != 0) == class)
            .collect();
        rows.shuffle(rng);
        for r in rows {
            folds[slot % k].push(r);
            slot += 1;
        }
    }
    for (f, rows) in folds.iter().enumerate() {
        let pos = rows.iter().filter(|&&r| labels[r] != 0).count();
        if pos == 0 || pos == rows.len() {
            return Err(Error::FoldTooSmall {
                folds: k,
                detail: format!("fold {f} contains a single class"),
            });
        }
    }
    for rows in &mut folds {
        rows.sort_unstable();
    }
    Ok(folds)
}

/// Stratified k-fold cross-validation. `fit_score` receives the training and
/// validation row indices of one fold and returns the validation metric.
pub fn kfold_cv<F>(labels: &[u8], k: usize, rng: &mut Rng, mut fit_score: F) -> Result<CvResult>
where
    F: FnMut(&[usize], &[usize]) -> Result<f64>,
{
    let folds = stratified_folds(labels, k, rng)?;
    let mut fold_scores = Vec::with_capacity(k);
    for (f, validation) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, rows)| rows.iter().copied())
            .collect();
        fold_scores.push(fit_score(&train, validation)?);
    }
    let mean = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
    Ok(CvResult { fold_scores, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn labels(n: usize) -> Vec<u8> {
        (0..n).map(|i| u8::from(i % 3 == 0)).collect()
    }

    #[test]
    fn folds_partition_rows() {
        let y = labels(100);
        let folds = stratified_folds(&y, 5, &mut seeded_rng(1)).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        for f in &folds {
            assert!(f.len() == 20);
            assert!(f.iter().any(|&r| y[r] == 1) && f.iter().any(|&r| y[r] == 0));
        }
        assert_eq!(folds, stratified_folds(&y, 5, &mut seeded_rng(1)).unwrap());
    }

    #[test]
    fn leave_one_out_loses_a_class() {
        let y = labels(12);
        assert!(matches!(
            stratified_folds(&y, 12, &mut seeded_rng(1)),
            Err(Error::FoldTooSmall { .. })
        ));
        assert!(matches!(
            stratified_folds(&y, 1, &mut seeded_rng(1)),
            Err(Error::FoldTooSmall { .. })
        ));
    }

    #[test]
    fn every_row_validated_once_and_mean_matches() {
        let y = labels(60);
        let mut seen = vec![0usize; 60];
        let r = kfold_cv(&y, 4, &mut seeded_rng(3), |train, val| {
            assert_eq!(train.len() + val.len(), 60);
            for &v in val {
                seen[v] += 1;
                assert!(!train.contains(&v));
            }
            Ok(val.len() as f64 / 7.0)
        })
        .unwrap();
        assert!(seen.iter().all(|&c| c == 1));
        let m = r.fold_scores.iter().sum::<f64>() / 4.0;
        assert!((r.mean - m).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn reported_mean_is_the_fold_average(
            n in 12usize..80,
            k in 2usize..5,
            seed in proptest::prelude::any::<u64>(),
            scale in 0.01f64..10.0,
        ) {
            let y = labels(n);
            let r = kfold_cv(&y, k, &mut seeded_rng(seed), |train, val| {
                Ok(scale * (val.len() as f64).sqrt() / (1.0 + train.len() as f64))
            })
            .unwrap();
            let m = r.fold_scores.iter().sum::<f64>() / r.fold_scores.len() as f64;
            proptest::prop_assert!((r.mean - m).abs() < 1e-12);
        }
    }
}
