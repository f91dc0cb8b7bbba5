use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ModelKind, Params, Regressor};
use crate::error::{Error, Result};
use crate::rng;

/// Anything that exposes one prediction per member, as `n_members x n_rows`.
pub trait MemberPredictions {
    fn n_members(&self) -> usize;
    fn predict_members(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>>;
}

/// Homogeneous bagging ensemble. Member `i` is fit with seed `seed + i` on
/// the bootstrap resample drawn from that seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub members: Vec<Regressor>,
    pub bootstrap_seed: u64,
    pub bootstrap: bool,
}

impl Ensemble {
    pub fn fit(
        kind: ModelKind,
        params: &Params,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        n_members: usize,
        seed: u64,
    ) -> Result<Ensemble> {
        Self::fit_with(kind, params, x, y, n_members, seed, true)
    }

    /// `bootstrap = false` fits every member on the full data (test hook).
    pub fn fit_with(
        kind: ModelKind,
        params: &Params,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        n_members: usize,
        seed: u64,
        bootstrap: bool,
    ) -> Result<Ensemble> {
        if n_members == 0 {
            return Err(Error::InvalidHyperparameter("ensemble needs at least one member".into()));
        }
        let n = x.nrows();
        let members = (0..n_members)
            .into_par_iter()
            .map(|i| {
                let s = seed.wrapping_add(i as u64);
                let mut r = Regressor::new(kind, params.clone(), s)?;
                if bootstrap {
                    let rows = rng::bootstrap_indices(n, s);
                    let (xb, yb) = super::nn::batch(x, y, &rows);
                    r.fit_xy(&xb, &yb)?;
                } else {
                    r.fit_xy(x, y)?;
                }
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Ensemble { members, bootstrap_seed: seed, bootstrap })
    }

    /// Column means of the member predictions.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let m = self.predict_members(x)?;
        Ok(DVector::from_fn(x.nrows(), |i, _| m.column(i).mean()))
    }
}

impl MemberPredictions for Ensemble {
    fn n_members(&self) -> usize {
        self.members.len()
    }

    fn predict_members(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let rows = self
            .members
            .par_iter()
            .map(|m| m.predict(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_fn(rows.len(), x.nrows(), |m, i| rows[m][i]))
    }
}

impl MemberPredictions for super::forest::RandomForest {
    fn n_members(&self) -> usize {
        self.trees.len()
    }

    fn predict_members(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(super::forest::RandomForest::predict_members(self, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (DMatrix<f64>, DVector<f64>) {
        let x = DMatrix::from_fn(25, 2, |i, j| ((i * 7 + j * 5) % 13) as f64 * 0.2);
        let y = DVector::from_fn(25, |i, _| x[(i, 0)] - 2.0 * x[(i, 1)] + ((i % 3) as f64) * 0.1);
        (x, y)
    }

    #[test]
    fn single_member_equals_model() {
        let (x, y) = toy();
        let e = Ensemble::fit_with(ModelKind::Ridge, &Params::new(), &x, &y, 1, 4, false).unwrap();
        let mut r = Regressor::new(ModelKind::Ridge, Params::new(), 4).unwrap();
        r.fit_xy(&x, &y).unwrap();
        let m = e.predict_members(&x).unwrap();
        assert_eq!(m.row(0).transpose(), r.predict(&x).unwrap());
    }

    #[test]
    fn no_bootstrap_gives_identical_rows() {
        let (x, y) = toy();
        let e = Ensemble::fit_with(ModelKind::Linear, &Params::new(), &x, &y, 4, 0, false).unwrap();
        let m = e.predict_members(&x).unwrap();
        for k in 1..4 {
            assert_eq!(m.row(k), m.row(0));
        }
    }

    #[test]
    fn mean_equals_average_of_separate_fits() {
        let (x, y) = toy();
        let e = Ensemble::fit(ModelKind::Linear, &Params::new(), &x, &y, 5, 10).unwrap();
        let mut sum = DVector::zeros(x.nrows());
        for i in 0..5u64 {
            let rows = rng::bootstrap_indices(x.nrows(), 10 + i);
            let (xb, yb) = crate::models::nn::batch(&x, &y, &rows);
            let mut r = Regressor::new(ModelKind::Linear, Params::new(), 10 + i).unwrap();
            r.fit_xy(&xb, &yb).unwrap();
            sum += r.predict(&x).unwrap();
        }
        let mean = e.predict(&x).unwrap();
        assert!((mean - sum / 5.0).abs().max() < 1e-12);
    }
}
