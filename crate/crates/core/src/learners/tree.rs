use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        prob: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Index of the child for `x[feature] <= threshold`.
        left: usize,
        right: usize,
    },
}

/// A CART classification tree stored as a flat node list rooted at 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { prob } => return *prob,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; all of them when `None`.
    pub max_features: Option<usize>,
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let q = pos / n;
    2.0 * q * (1.0 - q)
}

struct Builder<'a> {
    x: &'a [f64],
    p: usize,
    y: &'a [u8],
    params: &'a TreeParams,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn build(&mut self, rows: &mut [usize], depth: usize, rng: &mut Rng) -> usize {
        let id = self.nodes.len();
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.y[r] != 0).count();
        self.nodes.push(TreeNode::Leaf {
            prob: pos as f64 / n as f64,
        });
        if depth >= self.params.max_depth || pos == 0 || pos == n || n < 2 * self.params.min_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(rows, pos, rng) else {
            return id;
        };
        let split = partition(rows, |r| self.x[r * self.p + feature] <= threshold);
        let (l, r) = rows.split_at_mut(split);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Largest Gini decrease; ties keep the lowest feature index, then the
    /// lowest threshold.
    fn best_split(&self, rows: &[usize], pos: usize, rng: &mut Rng) -> Option<(usize, f64)> {
        let n = rows.len();
        let parent = gini(pos as f64, n as f64) * n as f64;
        let features: Vec<usize> = match self.params.max_features {
            Some(m) if m < self.p => {
                let mut f = sample(rng, self.p, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..self.p).collect(),
        };
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order: Vec<(f64, u8)> = Vec::with_capacity(n);
        for &j in &features {
            order.clear();
            order.extend(rows.iter().map(|&r| (self.x[r * self.p + j], self.y[r])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0usize;
            for i in 0..n - 1 {
                left_pos += usize::from(order[i].1 != 0);
                let left_n = i + 1;
                if order[i].0 == order[i + 1].0 || left_n < min_leaf || n - left_n < min_leaf {
                    continue;
                }
                let child = gini(left_pos as f64, left_n as f64) * left_n as f64
                    + gini((pos - left_pos) as f64, (n - left_n) as f64) * (n - left_n) as f64;
                let gain = parent - child;
                if gain > 1e-12 && best.is_none_or(|(_, _, g)| gain > g + 1e-12) {
                    let threshold = order[i].0 + (order[i + 1].0 - order[i].0) / 2.0;
                    best = Some((j, threshold, gain));
                }
            }
        }
        best.map(|(j, t, _)| (j, t))
    }
}

/// Stable in-place partition; returns the number of rows satisfying `pred`.
fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| pred(r));
    let k = yes.len();
    for (slot, r) in rows.iter_mut().zip(yes.into_iter().chain(no)) {
        *slot = r;
    }
    k
}

pub(crate) fn fit_tree(
    x: &[f64],
    p: usize,
    y: &[u8],
    rows: &[usize],
    params: &TreeParams,
    rng: &mut Rng,
) -> DecisionTree {
    let mut rows = rows.to_vec();
    let mut b = Builder {
        x,
        p,
        y,
        params,
        nodes: Vec::new(),
    };
    b.build(&mut rows, 0, rng);
    DecisionTree { nodes: b.nodes }
}

pub(crate) fn bootstrap(n: usize, rng: &mut Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}
