//! Gaussian process regression with a unit-signal RBF kernel
//! `k(a, b) = exp(−‖a − b‖² / (2γ²))` and white noise `α`.

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diagonal jitter tried in turn when `K + αI` is not numerically positive
/// definite.
const JITTER: [f64; 8] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

pub fn log_grid(lo_exp: i32, hi_exp: i32, points: usize) -> Vec<f64> {
    let step = (hi_exp - lo_exp) as f64 / (points - 1) as f64;
    (0..points).map(|i| 10f64.powf(lo_exp as f64 + step * i as f64)).collect()
}

/// Length scales `10^-2 .. 10^2`, nine points.
pub fn default_gamma_grid() -> Vec<f64> {
    log_grid(-2, 2, 9)
}

/// Noise levels `10^-6 .. 10^0`, seven points.
pub fn default_alpha_grid() -> Vec<f64> {
    log_grid(-6, 0, 7)
}

fn sq_dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    (0..a.ncols()).map(|c| (a[(i, c)] - b[(j, c)]).powi(2)).sum()
}

pub fn kernel(a: &DMatrix<f64>, b: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let s = 2.0 * gamma * gamma;
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| (-sq_dist(a, i, b, j) / s).exp())
}

fn factor(x: &DMatrix<f64>, gamma: f64, alpha: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let k = kernel(x, x, gamma);
    for &j in &JITTER {
        let mut m = k.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += alpha + j;
        }
        if let Some(c) = m.cholesky() {
            if j > 0.0 {
                warn!("kernel matrix needed jitter {j:e} (gamma {gamma}, alpha {alpha})");
            }
            return Ok((c, j));
        }
    }
    Err(Error::CholeskyFailure(JITTER[JITTER.len() - 1]))
}

fn lml_from(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> (f64, DVector<f64>) {
    let a = chol.solve(y);
    let n = y.len() as f64;
    let log_det_half: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    let lml = -0.5 * y.dot(&a) - log_det_half - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
    (lml, a)
}

/// `−½ yᵀ(K+αI)⁻¹y − ½ log det(K+αI) − (n/2) log 2π`.
pub fn log_marginal_likelihood(x: &DMatrix<f64>, y: &DVector<f64>, gamma: f64, alpha: f64) -> Result<f64> {
    let (c, _) = factor(x, gamma, alpha)?;
    Ok(lml_from(&c, y).0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GprModel {
    pub gamma: f64,
    pub alpha: f64,
    /// Jitter added on top of `alpha` to make the factorization succeed.
    pub jitter: f64,
    pub lml: f64,
    pub x_train: DMatrix<f64>,
    /// `(K + αI)⁻¹ y`.
    pub alpha_vector: DVector<f64>,
    /// Lower Cholesky factor; rebuilt by [`GprModel::rebuild`] after loading.
    #[serde(skip)]
    l: Option<DMatrix<f64>>,
}

impl PartialEq for GprModel {
    fn eq(&self, o: &Self) -> bool {
        self.gamma == o.gamma
            && self.alpha == o.alpha
            && self.jitter == o.jitter
            && self.x_train == o.x_train
            && self.alpha_vector == o.alpha_vector
    }
}

impl GprModel {
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, gamma: f64, alpha: f64) -> Result<GprModel> {
        if !(gamma > 0.0) || !(alpha >= 0.0) {
            return Err(Error::InvalidHyperparameter(format!("gamma {gamma}, alpha {alpha}")));
        }
        let (c, jitter) = factor(x, gamma, alpha)?;
        let (lml, a) = lml_from(&c, y);
        Ok(GprModel {
            gamma,
            alpha,
            jitter,
            lml,
            x_train: x.clone(),
            alpha_vector: a,
            l: Some(c.l()),
        })
    }

    /// Fit at the grid pair with the highest log marginal likelihood on
    /// `(x_sel, y_sel)`, then refit on `(x, y)` with those hyperparameters.
    /// Ties go to the larger `alpha`.
    pub fn fit_lml_on(
        x_sel: &DMatrix<f64>,
        y_sel: &DVector<f64>,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        gammas: &[f64],
        alphas: &[f64],
    ) -> Result<GprModel> {
        let (gamma, alpha, _) = select_hyperparameters(x_sel, y_sel, gammas, alphas)?;
        Self::fit(x, y, gamma, alpha)
    }

    pub fn fit_lml(x: &DMatrix<f64>, y: &DVector<f64>, gammas: &[f64], alphas: &[f64]) -> Result<GprModel> {
        Self::fit_lml_on(x, y, x, y, gammas, alphas)
    }

    /// Restore the Cholesky factor after deserialization.
    pub fn rebuild(&mut self) -> Result<()> {
        let k = kernel(&self.x_train, &self.x_train, self.gamma);
        let mut m = k;
        for i in 0..m.nrows() {
            m[(i, i)] += self.alpha + self.jitter;
        }
        self.l = Some(m.cholesky().ok_or(Error::CholeskyFailure(self.jitter))?.l());
        Ok(())
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        kernel(x, &self.x_train, self.gamma) * &self.alpha_vector
    }

    /// Predictive mean and variance `1 − k*ᵀ(K+αI)⁻¹k*` (noise-free latent).
    pub fn predict_var(&self, x: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let l = self.l.as_ref().ok_or(Error::NotFitted)?;
        let ks = kernel(&self.x_train, x, self.gamma);
        let mean = ks.transpose() * &self.alpha_vector;
        let v = l.solve_lower_triangular(&ks).ok_or(Error::CholeskyFailure(self.jitter))?;
        let var = DVector::from_fn(x.nrows(), |i, _| {
            let s = 1.0 - v.column(i).norm_squared();
            if s < -1e-9 {
                warn!("negative predictive variance {s:e} clamped to 0");
            }
            s.max(0.0)
        });
        Ok((mean, var))
    }
}

/// Grid search over `(gamma, alpha)`; returns the winner and its LML.
pub fn select_hyperparameters(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    gammas: &[f64],
    alphas: &[f64],
) -> Result<(f64, f64, f64)> {
    if gammas.is_empty() || alphas.is_empty() {
        return Err(Error::InvalidHyperparameter("empty hyperparameter grid".into()));
    }
    let mut best: Option<(f64, f64, f64)> = None;
    let mut last_err = None;
    for &g in gammas {
        for &a in alphas {
            match log_marginal_likelihood(x, y, g, a) {
                Ok(lml) => {
                    let better = match best {
                        None => true,
                        Some((_, ba, bl)) => lml > bl || (lml == bl && a > ba),
                    };
                    if better {
                        best = Some((g, a, lml));
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::CholeskyFailure(JITTER[JITTER.len() - 1])))
}
