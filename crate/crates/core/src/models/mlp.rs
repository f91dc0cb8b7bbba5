use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::nn::{batch, Adam, Arch};
use crate::error::{Error, Result};
use crate::rng::{self, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig { hidden: vec![32], epochs: 200, batch_size: 32, learning_rate: 1e-2 }
    }
}

/// Multilayer perceptron trained on mean squared error with Adam. The
/// parameters kept are those with the lowest full-training-set loss seen at
/// the end of any epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub arch: Arch,
    pub params: Vec<f64>,
    /// Best-so-far training loss after each epoch.
    pub loss_trace: Vec<f64>,
}

/// Mean squared error and its gradient.
pub fn mse_loss_grad(arch: &Arch, params: &[f64], x: &DMatrix<f64>, y: &DVector<f64>) -> (f64, Vec<f64>) {
    let acts = arch.forward(params, x);
    let out = acts.last().expect("output layer");
    let b = x.nrows() as f64;
    let resid = DMatrix::from_fn(x.nrows(), 1, |i, _| out[(i, 0)] - y[i]);
    let loss = resid.norm_squared() / b;
    let grad = arch.backward(params, &acts, &(resid * (2.0 / b)));
    (loss, grad)
}

impl Mlp {
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, cfg: &MlpConfig, seed: u64) -> Result<Mlp> {
        if cfg.batch_size == 0 || cfg.epochs == 0 || !(cfg.learning_rate > 0.0) {
            return Err(Error::InvalidHyperparameter(format!("{cfg:?}")));
        }
        let mut sizes = vec![x.ncols()];
        sizes.extend(&cfg.hidden);
        sizes.push(1);
        let arch = Arch::new(sizes);
        let mut rng = seeded(seed);
        let mut params = arch.init(&mut rng);
        let mut adam = Adam::new(params.len(), cfg.learning_rate);
        let mut order: Vec<usize> = (0..x.nrows()).collect();
        let (mut best, mut best_loss) = (params.clone(), mse_loss_grad(&arch, &params, x, y).0);
        let mut trace = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            rng::fisher_yates(&mut order, &mut rng);
            for chunk in order.chunks(cfg.batch_size) {
                let (xb, yb) = batch(x, y, chunk);
                let (_, g) = mse_loss_grad(&arch, &params, &xb, &yb);
                adam.step(&mut params, &g);
            }
            let loss = mse_loss_grad(&arch, &params, x, y).0;
            if !loss.is_finite() {
                return Err(Error::DivergedTraining { epoch });
            }
            if loss < best_loss {
                best_loss = loss;
                best.copy_from_slice(&params);
            }
            trace.push(best_loss);
        }
        Ok(Mlp { arch, params: best, loss_trace: trace })
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        self.arch.predict(&self.params, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learns_a_line() {
        let x = DMatrix::from_fn(60, 1, |i, _| -1.0 + i as f64 / 30.0);
        let y = x.column(0).map(|v| 2.0 * v);
        let m = Mlp::fit(&x, &y, &MlpConfig::default(), 0).unwrap();
        let err = (m.predict(&x) - &y).abs().max();
        assert!(err < 0.1, "max error {err}");
        for w in m.loss_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}
