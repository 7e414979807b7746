//! Neighborhood selection: one lasso regression per vertex, with the penalty
//! picked by contiguous k-fold cross-validation on held-out squared error.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::lasso::{lasso_cd_from, LassoProblem};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::dot;

pub const GRID_SIZE: usize = 10;

/// Ten penalties from `lambda_max = (1/N) max_{j != h} |<Y_j, Y_h>|` down to
/// `lambda_max / 100`, evenly spaced in log scale.
pub fn lambda_grid(columns: &[Vec<f64>], h: usize) -> Result<[f64; GRID_SIZE]> {
    if columns.len() < 2 {
        return Err(Error::DegenerateDesign);
    }
    let n = columns[h].len();
    if n < 2 {
        return Err(Error::TooFewRows { rows: n, needed: 2 });
    }
    let lambda_max = columns
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != h)
        .map(|(_, c)| dot(c, &columns[h]).abs() / n as f64)
        .fold(0.0, f64::max);
    if !(lambda_max > 0.0) {
        return Err(Error::DegenerateDesign);
    }
    let ratio = 0.01f64.powf(1.0 / (GRID_SIZE - 1) as f64);
    let mut grid = [0.0; GRID_SIZE];
    for (i, g) in grid.iter_mut().enumerate() {
        *g = lambda_max * ratio.powi(i as i32);
    }
    grid[GRID_SIZE - 1] = lambda_max / 100.0;
    Ok(grid)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineRule {
    /// Edge when either endpoint selects the other.
    #[default]
    Or,
    /// Edge only when both endpoints select each other.
    And,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlassoConfig {
    pub folds: usize,
    pub combine: CombineRule,
    /// Pick the largest penalty within one standard error of the CV minimum
    /// instead of the minimum itself.
    pub one_standard_error: bool,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for GlassoConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            combine: CombineRule::Or,
            one_standard_error: true,
            tol: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

/// Undirected dependence graph over named vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependenceGraph {
    pub vertices: Vec<String>,
    /// Pairs `(a, b)` with `a < b`.
    pub edges: BTreeSet<(usize, usize)>,
    /// `coefficients[h][j]` is vertex `j`'s weight in `h`'s regression (0 on the diagonal).
    pub coefficients: Vec<Vec<f64>>,
    /// Penalty chosen for each vertex; absent when the vertex had no neighbors to try.
    pub lambdas: Vec<Option<f64>>,
    pub combine: CombineRule,
}

impl DependenceGraph {
    /// Vertices `h` selected in its own regression.
    pub fn neighborhood(&self, h: usize) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&j| self.coefficients[h][j] != 0.0)
            .collect()
    }

    /// `a,b,weight_a_on_b,weight_b_on_a` lines with a header.
    pub fn write_edge_list<W: std::io::Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "source,target,beta_source_target,beta_target_source")?;
        for &(a, b) in &self.edges {
            writeln!(
                sink,
                "{},{},{},{}",
                self.vertices[a],
                self.vertices[b],
                self.coefficients[a][b],
                self.coefficients[b][a]
            )?;
        }
        Ok(())
    }

    /// 0/1 adjacency matrix in vertex order.
    pub fn adjacency(&self) -> Vec<Vec<u8>> {
        let h = self.vertices.len();
        let mut a = vec![vec![0u8; h]; h];
        for &(i, j) in &self.edges {
            a[i][j] = 1;
            a[j][i] = 1;
        }
        a
    }
}

fn contiguous_folds(n: usize, k: usize) -> Vec<std::ops::Range<usize>> {
    (0..k).map(|f| f * n / k..(f + 1) * n / k).collect()
}

fn select_lambda(
    columns: &[Vec<f64>],
    h: usize,
    grid: &[f64; GRID_SIZE],
    cfg: &GlassoConfig,
) -> Result<f64> {
    let n = columns[h].len();
    let others: Vec<usize> = (0..columns.len()).filter(|&j| j != h).collect();
    let mut errors = vec![Vec::new(); GRID_SIZE];
    for fold in contiguous_folds(n, cfg.folds) {
        let take = |c: &Vec<f64>| -> Vec<f64> {
            c[..fold.start]
                .iter()
                .chain(&c[fold.end..])
                .copied()
                .collect()
        };
        let mut warm: Option<Vec<f64>> = None;
        for (g, &lambda) in grid.iter().enumerate() {
            let problem = LassoProblem {
                response: take(&columns[h]),
                columns: others.iter().map(|&j| take(&columns[j])).collect(),
                lambda,
                tol: cfg.tol,
                max_sweeps: cfg.max_sweeps,
            };
            let fit = lasso_cd_from(&problem, warm.as_deref())?;
            let mse = fold
                .clone()
                .map(|i| {
                    let pred: f64 = others
                        .iter()
                        .zip(&fit.beta)
                        .map(|(&j, b)| b * columns[j][i])
                        .sum();
                    (columns[h][i] - pred).powi(2)
                })
                .sum::<f64>()
                / fold.len() as f64;
            errors[g].push(mse);
            warm = Some(fit.beta);
        }
    }
    let k = cfg.folds as f64;
    let means: Vec<f64> = errors.iter().map(|e| e.iter().sum::<f64>() / k).collect();
    let best = (0..GRID_SIZE)
        .min_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)))
        .expect("nonempty grid");
    if !cfg.one_standard_error {
        return Ok(grid[best]);
    }
    let e = &errors[best];
    let var = e.iter().map(|v| (v - means[best]).powi(2)).sum::<f64>() / (k - 1.0);
    let se = (var / k).sqrt();
    // grid is descending, so the first index within bound is the largest penalty
    let pick = (0..GRID_SIZE)
        .find(|&g| means[g] <= means[best] + se)
        .unwrap_or(best);
    Ok(grid[pick])
}

/// Estimates the dependence graph of the (standardized) columns of `y`.
pub fn neighborhood_glasso(y: &FeatureMatrix, cfg: &GlassoConfig) -> Result<DependenceGraph> {
    let h_count = y.n_cols();
    let n = y.n_rows();
    let vertices: Vec<String> = y.names().into_iter().map(String::from).collect();
    let mut graph = DependenceGraph {
        vertices,
        edges: BTreeSet::new(),
        coefficients: vec![vec![0.0; h_count]; h_count],
        lambdas: vec![None; h_count],
        combine: cfg.combine,
    };
    if h_count < 2 {
        return Ok(graph);
    }
    if cfg.folds < 2 || n < cfg.folds || n / cfg.folds < 1 {
        return Err(Error::FoldTooSmall {
            folds: cfg.folds,
            detail: format!("{n} rows"),
        });
    }
    let columns: Vec<Vec<f64>> = (0..h_count).map(|j| y.column(j)).collect();
    for h in 0..h_count {
        let grid = match lambda_grid(&columns, h) {
            Ok(g) => g,
            // uncorrelated with every other column: isolated vertex
            Err(Error::DegenerateDesign) => continue,
            Err(e) => return Err(e),
        };
        let lambda = select_lambda(&columns, h, &grid, cfg)?;
        let others: Vec<usize> = (0..h_count).filter(|&j| j != h).collect();
        let problem = LassoProblem {
            response: columns[h].clone(),
            columns: others.iter().map(|&j| columns[j].clone()).collect(),
            lambda,
            tol: cfg.tol,
            max_sweeps: cfg.max_sweeps,
        };
        let fit = lasso_cd_from(&problem, None)?;
        for (&j, &b) in others.iter().zip(&fit.beta) {
            graph.coefficients[h][j] = b;
        }
        graph.lambdas[h] = Some(lambda);
    }
    for a in 0..h_count {
        for b in a + 1..h_count {
            let (ab, ba) = (
                graph.coefficients[a][b] != 0.0,
                graph.coefficients[b][a] != 0.0,
            );
            let keep = match cfg.combine {
                CombineRule::Or => ab || ba,
                CombineRule::And => ab && ba,
            };
            if keep {
                graph.edges.insert((a, b));
            }
        }
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{standardize, ColumnMeta, ColumnTag};
    use crate::seeded_rng;
    use rand_distr::{Distribution, StandardNormal};

    pub(crate) fn chain(n: usize, h: usize, rho: f64, seed: u64) -> FeatureMatrix {
        let mut rng = seeded_rng(seed);
        let mut cols = vec![Vec::with_capacity(n); h];
        for _ in 0..n {
            let mut prev: f64 = StandardNormal.sample(&mut rng);
            cols[0].push(prev);
            for col in cols.iter_mut().skip(1) {
                let e: f64 = StandardNormal.sample(&mut rng);
                prev = rho * prev + (1.0 - rho * rho).sqrt() * e;
                col.push(prev);
            }
        }
        let meta = (0..h)
            .map(|j| ColumnMeta::new(format!("x{j}"), ColumnTag::External))
            .collect();
        standardize(&FeatureMatrix::from_columns(cols, meta, None).unwrap())
            .unwrap()
            .0
    }

    #[test]
    fn grid_shape() {
        let cols = vec![vec![1.0, -1.0, 2.0, 0.0], vec![0.5, 1.0, -1.0, 3.0]];
        let g = lambda_grid(&cols, 1).unwrap();
        let direct = (0.5 - 1.0 - 2.0 + 0.0f64).abs() / 4.0;
        assert_eq!(g[0], direct);
        assert_eq!(g[9], g[0] / 100.0);
        let r0 = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] - r0).abs() < 1e-12));
        let zero = vec![vec![1.0, -1.0, 1.0, -1.0], vec![1.0, 1.0, -1.0, -1.0]];
        assert!(matches!(
            lambda_grid(&zero, 0),
            Err(Error::DegenerateDesign)
        ));
    }

    #[test]
    fn lambda_max_zeroes_the_neighborhood() {
        let y = chain(300, 4, 0.6, 1);
        let cols: Vec<Vec<f64>> = (0..4).map(|j| y.column(j)).collect();
        for h in 0..4 {
            let g = lambda_grid(&cols, h).unwrap();
            let p = LassoProblem::new(
                cols[h].clone(),
                (0..4)
                    .filter(|&j| j != h)
                    .map(|j| cols[j].clone())
                    .collect(),
                g[0],
            );
            let fit = super::super::lasso_cd(&p).unwrap();
            assert!(fit.beta.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn single_vertex_graph_is_empty() {
        let y = chain(50, 1, 0.0, 2);
        let g = neighborhood_glasso(&y, &GlassoConfig::default()).unwrap();
        assert!(g.edges.is_empty());
    }

    #[test]
    fn recovers_a_chain_and_respects_combination() {
        let y = chain(2000, 5, 0.6, 3);
        let or = neighborhood_glasso(&y, &GlassoConfig::default()).unwrap();
        let and = neighborhood_glasso(
            &y,
            &GlassoConfig {
                combine: CombineRule::And,
                ..GlassoConfig::default()
            },
        )
        .unwrap();
        let chain_edges: BTreeSet<(usize, usize)> = (0..4).map(|i| (i, i + 1)).collect();
        assert_eq!(or.edges, chain_edges);
        let cv_min = neighborhood_glasso(
            &y,
            &GlassoConfig {
                one_standard_error: false,
                ..GlassoConfig::default()
            },
        )
        .unwrap();
        assert!(chain_edges.is_subset(&cv_min.edges));
        assert!(and.edges.is_subset(&or.edges));
        for &(a, b) in &or.edges {
            assert!(or.coefficients[a][b] != 0.0 || or.coefficients[b][a] != 0.0);
        }
        assert!(or.edges.iter().all(|(a, b)| a != b));
        let mut out = Vec::new();
        or.write_edge_list(&mut out).unwrap();
        assert!(String::from_utf8(out)
            .unwrap()
            .lines()
            .any(|l| l.starts_with("x0,x1,")));
    }

    #[test]
    fn column_permutation_relabels() {
        let y = chain(600, 4, 0.5, 4);
        let perm = [2usize, 0, 3, 1];
        let g = neighborhood_glasso(&y, &GlassoConfig::default()).unwrap();
        let gp = neighborhood_glasso(&y.select_columns(&perm), &GlassoConfig::default()).unwrap();
        let mapped: BTreeSet<(usize, usize)> = gp
            .edges
            .iter()
            .map(|&(a, b)| (perm[a].min(perm[b]), perm[a].max(perm[b])))
            .collect();
        assert_eq!(mapped, g.edges);
    }
}
