use super::mi::{discrete_mutual_information, discretize};
use super::{ColumnTag, FeatureMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 10;
pub const DEFAULT_SELECTED: usize = 25;

const TIE: f64 = 1e-12;

/// Greedy minimum-redundancy maximum-relevance selection in difference form.
///
/// The first pick maximizes `I(x; y)`; each later pick maximizes
/// `I(x; y) - mean_s I(x; x_s)` over the features already chosen. Scores
/// within `1e-12` of the best are treated as tied; ties go to the candidate
/// with the lower mean redundancy, then to the lower column index.
/// Continuous columns use `bins` equal-width bins and dummy columns two.
pub fn mrmr_select(x: &FeatureMatrix, y: &[u8], k: usize, bins: usize) -> Result<Vec<usize>> {
    let p = x.n_cols();
    if k == 0 || k > p {
        return Err(Error::KOutOfRange { k, max: p });
    }
    if y.len() != x.n_rows() {
        return Err(Error::LengthMismatch {
            left: x.n_rows(),
            right: y.len(),
        });
    }
    let labels: Vec<usize> = y.iter().map(|&l| usize::from(l != 0)).collect();
    let codes: Vec<Vec<usize>> = (0..p)
        .map(|j| {
            let b = if x.columns()[j].tag == ColumnTag::Dummy {
                2
            } else {
                bins
            };
            discretize(&x.column(j), b)
        })
        .collect();
    let relevance = codes
        .iter()
        .map(|c| discrete_mutual_information(c, &labels))
        .collect::<Result<Vec<_>>>()?;

    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut redundancy_sum = vec![0.0; p];
    let mut chosen = vec![false; p];
    while selected.len() < k {
        let m = selected.len() as f64;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in (0..p).filter(|&j| !chosen[j]) {
            let red = if selected.is_empty() {
                0.0
            } else {
                redundancy_sum[j] / m
            };
            let score = relevance[j] - red;
            best = match best {
                None => Some((j, score, red)),
                Some((bj, bs, br)) => {
                    if score > bs + TIE || ((score - bs).abs() <= TIE && red < br - TIE) {
                        Some((j, score, red))
                    } else {
                        Some((bj, bs, br))
                    }
                }
            };
        }
        let (pick, _, _) = best.expect("k <= p leaves a candidate");
        chosen[pick] = true;
        selected.push(pick);
        for j in (0..p).filter(|&j| !chosen[j]) {
            redundancy_sum[j] += discrete_mutual_information(&codes[j], &codes[pick])?;
        }
    }
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{mutual_information, ColumnMeta};
    use crate::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn matrix(cols: Vec<Vec<f64>>) -> FeatureMatrix {
        let meta = (0..cols.len())
            .map(|j| ColumnMeta::new(format!("x{j}"), ColumnTag::External))
            .collect();
        FeatureMatrix::from_columns(cols, meta, None).unwrap()
    }

    #[test]
    fn first_pick_is_most_relevant() {
        let mut rng = seeded_rng(1);
        let y: Vec<u8> = (0..400).map(|_| u8::from(rng.random::<bool>())).collect();
        let cols: Vec<Vec<f64>> = (0..5)
            .map(|j| {
                y.iter()
                    .map(|&l| f64::from(l) * j as f64 * 0.3 + rng.random::<f64>())
                    .collect()
            })
            .collect();
        let x = matrix(cols.clone());
        let yf: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
        let rel: Vec<f64> = cols
            .iter()
            .map(|c| discrete_mutual_information(&discretize(c, 10), &discretize(&yf, 2)).unwrap())
            .collect();
        let argmax = (0..5).max_by(|&a, &b| rel[a].total_cmp(&rel[b])).unwrap();
        assert_eq!(mrmr_select(&x, &y, 1, 10).unwrap(), vec![argmax]);
        assert!(mutual_information(&cols[argmax], &yf, 2).unwrap() > 0.0);
    }

    #[test]
    fn duplicate_of_the_label_is_skipped() {
        let mut rng = seeded_rng(2);
        let y: Vec<u8> = (0..200).map(|_| u8::from(rng.random::<bool>())).collect();
        let label: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
        let noise: Vec<f64> = (0..200)
            .map(|_| f64::from(u8::from(rng.random::<bool>())))
            .collect();
        let x = matrix(vec![label.clone(), label, noise]);
        assert_eq!(mrmr_select(&x, &y, 2, 10).unwrap(), vec![0, 2]);
        assert!(matches!(
            mrmr_select(&x, &y, 4, 10),
            Err(Error::KOutOfRange { k: 4, max: 3 })
        ));
        assert!(matches!(
            mrmr_select(&x, &y, 0, 10),
            Err(Error::KOutOfRange { .. })
        ));
    }

    proptest! {
        #[test]
        fn prefix_stable_without_duplicates(seed in 0u64..500, k in 1usize..6) {
            let mut rng = seeded_rng(seed);
            let y: Vec<u8> = (0..60).map(|_| u8::from(rng.random::<bool>())).collect();
            let cols: Vec<Vec<f64>> = (0..6)
                .map(|j| y.iter().map(|&l| f64::from(l) * (j % 3) as f64 + rng.random::<f64>()).collect())
                .collect();
            let x = matrix(cols);
            let full = mrmr_select(&x, &y, 6, 10).unwrap();
            let part = mrmr_select(&x, &y, k, 10).unwrap();
            prop_assert_eq!(&full[..k], &part[..]);
            let mut sorted = full.clone();
            sorted.sort();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), 6);
        }
    }
}
