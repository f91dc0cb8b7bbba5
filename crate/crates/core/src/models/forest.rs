use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Tree, TreeParams};
use crate::rng;

/// Bagged CART trees with per-split feature subsampling. Tree `i` uses seed
/// `seed + i` for both its bootstrap sample and its feature draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
}

impl RandomForest {
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, n_trees: usize, params: TreeParams, seed: u64) -> Self {
        let n = x.nrows();
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|i| {
                let s = seed.wrapping_add(i as u64);
                let rows = rng::bootstrap_indices(n, s);
                Tree::fit_rows(x, y, &rows, params, s)
            })
            .collect();
        RandomForest { trees }
    }

    /// `n_trees x n_rows`.
    pub fn predict_members(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let rows: Vec<DVector<f64>> = self.trees.iter().map(|t| t.predict(x)).collect();
        DMatrix::from_fn(rows.len(), x.nrows(), |m, i| rows[m][i])
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let m = self.predict_members(x);
        DVector::from_fn(x.nrows(), |i, _| m.column(i).mean())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_smooth_sine_in_range() {
        let n = 200;
        let x = DMatrix::from_fn(n, 1, |i, _| -1.0 + 2.0 * i as f64 / (n - 1) as f64);
        let y = DVector::from_fn(n, |i, _| (std::f64::consts::PI * x[(i, 0)]).sin());
        let f = RandomForest::fit(&x, &y, 50, TreeParams::default(), 7);
        let q = DMatrix::from_fn(41, 1, |i, _| -0.95 + 0.0475 * i as f64);
        let p = f.predict(&q);
        for i in 0..41 {
            assert!((p[i] - (std::f64::consts::PI * q[(i, 0)]).sin()).abs() < 0.2);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let x = DMatrix::from_fn(30, 2, |i, j| ((i * 3 + j) % 7) as f64);
        let y = DVector::from_fn(30, |i, _| i as f64);
        let a = RandomForest::fit(&x, &y, 5, TreeParams { max_features: 1, ..Default::default() }, 3);
        let b = RandomForest::fit(&x, &y, 5, TreeParams { max_features: 1, ..Default::default() }, 3);
        assert_eq!(a, b);
    }
}
