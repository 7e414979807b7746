use rand::Rng as _;

use super::{ColumnTag, FeatureMatrix};
use crate::error::{Error, Result};
use crate::Rng;

pub const DEFAULT_NEIGHBORS: usize = 5;

/// Synthetic minority oversampling up to exact class balance.
///
/// Each synthetic row is `p + u (q - p)` for a uniformly chosen minority row
/// `p`, one of its `k` nearest minority neighbors `q` (Euclidean) and
/// `u ~ U[0, 1)`. Dummy coordinates take the endpoint nearer to `u` so they
/// stay one-hot. Original rows come first, unchanged; synthetic rows follow.
/// `k` is clipped to the minority size minus one.
pub fn smote(
    x: &FeatureMatrix,
    y: &[u8],
    k_neighbors: usize,
    rng: &mut Rng,
) -> Result<(FeatureMatrix, Vec<u8>)> {
    if y.len() != x.n_rows() {
        return Err(Error::LengthMismatch {
            left: x.n_rows(),
            right: y.len(),
        });
    }
    let ones = y.iter().filter(|&&l| l != 0).count();
    let zeros = y.len() - ones;
    let (minority_label, minority, majority) = if ones <= zeros {
        (1u8, ones, zeros)
    } else {
        (0u8, zeros, ones)
    };
    let needed = majority - minority;
    let mut values = x.values().to_vec();
    let mut labels: Vec<u8> = y.iter().map(|&l| u8::from(l != 0)).collect();
    if needed > 0 {
        if minority < 2 {
            return Err(Error::MinorityTooSmall(minority));
        }
        let k = k_neighbors.clamp(1, minority - 1);
        let rows: Vec<usize> = (0..y.len())
            .filter(|&i| u8::from(y[i] != 0) == minority_label)
            .collect();
        let dummy: Vec<bool> = x
            .columns()
            .iter()
            .map(|c| c.tag == ColumnTag::Dummy)
            .collect();
        let mut neighbors: Vec<Option<Vec<usize>>> = vec![None; rows.len()];
        values.reserve(needed * x.n_cols());
        for _ in 0..needed {
            let a = rng.random_range(0..rows.len());
            let nn = neighbors[a].get_or_insert_with(|| nearest(x, &rows, a, k));
            let b = nn[rng.random_range(0..nn.len())];
            let u: f64 = rng.random();
            let (p, q) = (x.row(rows[a]), x.row(rows[b]));
            values.extend(p.iter().zip(q).zip(&dummy).map(|((&pv, &qv), &d)| {
                if d {
                    if u < 0.5 {
                        pv
                    } else {
                        qv
                    }
                } else {
                    pv + u * (qv - pv)
                }
            }));
            labels.push(minority_label);
        }
    }
    let out = FeatureMatrix::new(values, x.columns().to_vec(), Some(labels.clone()))?;
    Ok((out, labels))
}

/// Positions (within `rows`) of the `k` nearest minority rows to `rows[a]`,
/// ties broken by position.
fn nearest(x: &FeatureMatrix, rows: &[usize], a: usize, k: usize) -> Vec<usize> {
    let pa = x.row(rows[a]);
    let mut d: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .filter(|&(b, _)| b != a)
        .map(|(b, &r)| {
            (
                pa.iter()
                    .zip(x.row(r))
                    .map(|(u, v)| (u - v) * (u - v))
                    .sum(),
                b,
            )
        })
        .collect();
    d.sort_by(|l, r| l.0.total_cmp(&r.0).then(l.1.cmp(&r.1)));
    d.into_iter().take(k).map(|(_, b)| b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ColumnMeta;
    use crate::seeded_rng;

    fn data(minority: usize, majority: usize, seed: u64) -> (FeatureMatrix, Vec<u8>) {
        let mut rng = seeded_rng(seed);
        let n = minority + majority;
        let y: Vec<u8> = (0..n).map(|i| u8::from(i < minority)).collect();
        let cols = vec![
            (0..n).map(|_| rng.random::<f64>() * 10.0).collect(),
            (0..n)
                .map(|i| f64::from(y[i]) * 3.0 + rng.random::<f64>())
                .collect(),
        ];
        let meta = vec![
            ColumnMeta::new("a", ColumnTag::External),
            ColumnMeta::new("b", ColumnTag::Iot),
        ];
        (FeatureMatrix::from_columns(cols, meta, None).unwrap(), y)
    }

    /// Whether `s` lies on the segment between minority rows `p` and `q`.
    fn on_segment(s: &[f64], p: &[f64], q: &[f64]) -> bool {
        let d: Vec<f64> = p.iter().zip(q).map(|(a, b)| b - a).collect();
        let len2: f64 = d.iter().map(|v| v * v).sum();
        let u = if len2 == 0.0 {
            0.0
        } else {
            s.iter()
                .zip(p)
                .zip(&d)
                .map(|((s, p), d)| (s - p) * d)
                .sum::<f64>()
                / len2
        };
        (-1e-12..=1.0 + 1e-12).contains(&u)
            && s.iter()
                .zip(p)
                .zip(&d)
                .all(|((s, p), d)| (p + u * d - s).abs() < 1e-9)
    }

    #[test]
    fn balances_exactly_along_segments() {
        let (x, y) = data(10, 100, 1);
        let (out, labels) = smote(&x, &y, 5, &mut seeded_rng(2)).unwrap();
        assert_eq!(out.n_rows(), 200);
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 100);
        assert_eq!(&out.values()[..x.values().len()], x.values());
        let minority: Vec<&[f64]> = (0..10).map(|i| x.row(i)).collect();
        for i in 110..200 {
            let s = out.row(i);
            assert!(
                minority
                    .iter()
                    .any(|p| minority.iter().any(|q| on_segment(s, p, q))),
                "row {i} off every minority segment"
            );
        }
    }

    #[test]
    fn tiny_minority_rejected_and_balanced_input_untouched() {
        let (x, y) = data(1, 20, 3);
        assert!(matches!(
            smote(&x, &y, 5, &mut seeded_rng(1)),
            Err(Error::MinorityTooSmall(1))
        ));
        let (x, y) = data(8, 8, 3);
        let (out, _) = smote(&x, &y, 5, &mut seeded_rng(1)).unwrap();
        assert_eq!(out.values(), x.values());
    }

    #[test]
    fn dummy_columns_stay_binary() {
        let y = vec![1, 1, 1, 0, 0, 0, 0, 0];
        let cols = vec![
            vec![0.0, 1.0, 2.0, 5.0, 6.0, 7.0, 8.0, 9.0],
            vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0],
        ];
        let meta = vec![
            ColumnMeta::new("a", ColumnTag::External),
            ColumnMeta::new("d", ColumnTag::Dummy),
        ];
        let x = FeatureMatrix::from_columns(cols, meta, None).unwrap();
        let (out, labels) = smote(&x, &y, 2, &mut seeded_rng(5)).unwrap();
        assert_eq!(labels.len(), 10);
        assert!(out.column(1).iter().all(|&v| v == 0.0 || v == 1.0));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn originals_kept_and_synthetics_stay_on_minority_segments(
            minority in 2usize..12,
            majority in 12usize..40,
            k in 1usize..6,
            seed in proptest::prelude::any::<u64>(),
        ) {
            let (x, y) = data(minority, majority, seed);
            let (out, labels) = smote(&x, &y, k, &mut seeded_rng(seed ^ 1)).unwrap();
            proptest::prop_assert_eq!(labels.iter().filter(|&&l| l == 1).count() * 2, labels.len());
            proptest::prop_assert_eq!(&out.values()[..x.values().len()], x.values());
            proptest::prop_assert_eq!(&labels[..y.len()], &y[..]);
            let pts: Vec<&[f64]> = (0..minority).map(|i| x.row(i)).collect();
            for i in x.n_rows()..out.n_rows() {
                proptest::prop_assert_eq!(labels[i], 1);
                let s = out.row(i);
                proptest::prop_assert!(pts.iter().any(|p| pts.iter().any(|q| on_segment(s, p, q))));
            }
        }
    }
}
