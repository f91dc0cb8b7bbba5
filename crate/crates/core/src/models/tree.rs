use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `0` means unbounded.
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; `0` means all.
    pub max_features: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 0, min_samples_leaf: 1, max_features: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// CART regression tree grown on squared error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

struct Builder<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    params: TreeParams,
    rng: Rng,
    nodes: Vec<Node>,
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let value = rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() - 1
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.ncols();
        let m = self.params.max_features;
        if m == 0 || m >= p {
            return (0..p).collect();
        }
        let mut all: Vec<usize> = (0..p).collect();
        // Partial Fisher–Yates: the first m slots become a uniform subset.
        for i in 0..m {
            let j = i + rng::uniform_below(&mut self.rng, (p - i) as u64) as usize;
            all.swap(i, j);
        }
        let mut chosen = all[..m].to_vec();
        chosen.sort_unstable();
        chosen
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<Best> {
        let n = rows.len();
        let leaf = self.params.min_samples_leaf.max(1);
        let total: f64 = rows.iter().map(|&i| self.y[i]).sum();
        let total_sq: f64 = rows.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let parent_sse = total_sq - total * total / n as f64;
        let mut best: Option<Best> = None;
        let mut order = rows.to_vec();
        for f in self.candidate_features() {
            order.sort_by(|&a, &b| self.x[(a, f)].total_cmp(&self.x[(b, f)]));
            let (mut sum_l, mut sq_l) = (0.0, 0.0);
            for k in 0..n - 1 {
                let yi = self.y[order[k]];
                sum_l += yi;
                sq_l += yi * yi;
                let n_l = k + 1;
                let n_r = n - n_l;
                if n_l < leaf || n_r < leaf {
                    continue;
                }
                let (v, next) = (self.x[(order[k], f)], self.x[(order[k + 1], f)]);
                if v == next {
                    continue;
                }
                let sum_r = total - sum_l;
                let sq_r = total_sq - sq_l;
                let sse = (sq_l - sum_l * sum_l / n_l as f64) + (sq_r - sum_r * sum_r / n_r as f64);
                let gain = parent_sse - sse;
                // Strict improvement keeps the lowest feature, then lowest threshold.
                if gain > 0.0 && best.as_ref().map_or(true, |b| gain > b.gain) {
                    best = Some(Best { gain, feature: f, threshold: 0.5 * (v + next) });
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        let first = self.y[rows[0]];
        let pure = rows.iter().all(|&i| self.y[i] == first);
        let depth_hit = self.params.max_depth > 0 && depth >= self.params.max_depth;
        if pure || depth_hit || rows.len() < 2 * self.params.min_samples_leaf.max(1) {
            return self.leaf(rows);
        }
        let Some(best) = self.best_split(rows) else {
            return self.leaf(rows);
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.x[(i, best.feature)] <= best.threshold);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: f64::NAN });
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
        id
    }
}

impl Tree {
    /// Fit on the given row indices of `x` (duplicates allowed, as in a
    /// bootstrap resample).
    pub fn fit_rows(x: &DMatrix<f64>, y: &DVector<f64>, rows: &[usize], params: TreeParams, seed: u64) -> Tree {
        let mut b = Builder { x, y, params, rng: rng::seeded(seed), nodes: Vec::new() };
        b.grow(rows, 0);
        Tree { nodes: b.nodes, n_features: x.ncols() }
    }

    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, params: TreeParams, seed: u64) -> Tree {
        let rows: Vec<usize> = (0..x.nrows()).collect();
        Self::fit_rows(x, y, &rows, params, seed)
    }

    pub fn predict_one(&self, x: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    id = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut buf = vec![0.0; x.ncols()];
        DVector::from_fn(x.nrows(), |i, _| {
            for (j, v) in buf.iter_mut().enumerate() {
                *v = x[(i, j)];
            }
            self.predict_one(&buf)
        })
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}
