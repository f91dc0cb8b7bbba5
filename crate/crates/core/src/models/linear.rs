use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `y ≈ x·coef + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coef: DVector<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        x * &self.coef + DVector::from_element(x.nrows(), self.intercept)
    }
}

fn center(x: &DMatrix<f64>, y: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>, DVector<f64>, f64) {
    let n = x.nrows() as f64;
    let x_mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
    let y_mean = y.sum() / n;
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-x_mean[j]);
    }
    let yc = y.add_scalar(-y_mean);
    (xc, yc, x_mean, y_mean)
}

/// Least squares with an unpenalized intercept and ridge penalty `lambda·‖b‖²`,
/// solved from the centered normal equations.
pub fn fit_ridge(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<LinearModel> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidHyperparameter(format!("lambda = {lambda}")));
    }
    let (xc, yc, x_mean, y_mean) = center(x, y);
    let mut gram = xc.transpose() * &xc;
    let rhs = xc.transpose() * &yc;
    let p = gram.nrows();
    if lambda == 0.0 {
        let eig = SymmetricEigen::new(gram.clone());
        let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if p > 0 && (max == 0.0 || min <= max * 1e-12) {
            return Err(Error::SingularDesign);
        }
    }
    for i in 0..p {
        gram[(i, i)] += lambda;
    }
    let coef = gram.cholesky().ok_or(Error::SingularDesign)?.solve(&rhs);
    let intercept = y_mean - x_mean.dot(&coef);
    Ok(LinearModel { coef, intercept })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub model: LinearModel,
    /// Objective after every coordinate sweep.
    pub loss_trace: Vec<f64>,
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Smallest penalty at which every lasso coefficient is zero:
/// `max_j |x_jᵀ(y − ȳ)| / n` on centered columns.
pub fn lasso_lambda_max(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let (xc, yc, _, _) = center(x, y);
    let n = x.nrows() as f64;
    xc.column_iter().map(|c| (c.dot(&yc) / n).abs()).fold(0.0, f64::max)
}

/// Cyclic coordinate descent on `(1/2n)‖yc − Xc·b‖² + lambda·‖b‖₁`.
pub fn fit_lasso(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    max_iter: usize,
    tol: f64,
) -> Result<LassoFit> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidHyperparameter(format!("lambda = {lambda}")));
    }
    let (xc, yc, x_mean, y_mean) = center(x, y);
    let n = x.nrows() as f64;
    let p = x.ncols();
    let sq: Vec<f64> = xc.column_iter().map(|c| c.norm_squared() / n).collect();
    let mut b = DVector::zeros(p);
    let mut r = yc.clone();
    let objective = |r: &DVector<f64>, b: &DVector<f64>| {
        r.norm_squared() / (2.0 * n) + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
    };
    let mut trace = vec![objective(&r, &b)];
    let mut converged = false;
    for _ in 0..max_iter {
        let mut max_step = 0.0f64;
        for j in 0..p {
            if sq[j] == 0.0 {
                continue;
            }
            let col = xc.column(j);
            let rho = col.dot(&r) / n + sq[j] * b[j];
            let new = soft_threshold(rho, lambda) / sq[j];
            let step = new - b[j];
            if step != 0.0 {
                r.axpy(-step, &col, 1.0);
                b[j] = new;
                max_step = max_step.max(step.abs());
            }
        }
        trace.push(objective(&r, &b));
        if max_step < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("lasso reached {max_iter} sweeps without converging");
    }
    let intercept = y_mean - x_mean.dot(&b);
    Ok(LassoFit { model: LinearModel { coef: b, intercept }, loss_trace: trace })
}
