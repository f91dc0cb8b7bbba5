//! Bayesian neural network with a mean-field Gaussian posterior trained by
//! maximizing the evidence lower bound.
//!
//! Every weight has variational parameters `(μ, ρ)` with `σ = softplus(ρ)`
//! and is sampled as `w = μ + σ·ε`, `ε ~ N(0, 1)`. The prior is `N(μ_p, σ_p²)`
//! per weight and the likelihood Gaussian with fixed noise `σ_n`. Training
//! minimizes the per-datum negative ELBO of a minibatch,
//!
//! `(1/B)·Σ_b −log N(y_b | f_w(x_b), σ_n²) + KL(q‖p) / N`,
//!
//! with one ε draw per minibatch.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nn::{batch, Adam, Arch};
use crate::error::{Error, Result};
use crate::rng::{self, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnnConfig {
    /// Hidden widths; input and output sizes are added at fit time.
    pub hidden: Vec<usize>,
    pub prior_mu: f64,
    pub prior_sigma: f64,
    pub noise_sigma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rho_init: f64,
    pub mc_samples: usize,
}

impl Default for BnnConfig {
    fn default() -> Self {
        BnnConfig {
            hidden: vec![32, 16, 8],
            prior_mu: 0.0,
            prior_sigma: 1.0,
            noise_sigma: 0.1,
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-2,
            rho_init: -3.0,
            mc_samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnnModel {
    pub config: BnnConfig,
    pub arch: Arch,
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
    /// Best-so-far per-epoch negative ELBO (per datum).
    pub loss_trace: Vec<f64>,
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `KL(N(μ, σ²) ‖ N(μ_p, σ_p²))`.
pub fn kl_gaussian(mu: f64, sigma: f64, mu_p: f64, sigma_p: f64) -> f64 {
    (sigma_p / sigma).ln() + (sigma * sigma + (mu - mu_p).powi(2)) / (2.0 * sigma_p * sigma_p) - 0.5
}

/// Per-datum negative ELBO of a minibatch for fixed noise draws `eps`, and
/// its gradient with respect to `μ` and `ρ`.
#[allow(clippy::too_many_arguments)]
pub fn neg_elbo_grad(
    arch: &Arch,
    cfg: &BnnConfig,
    mu: &[f64],
    rho: &[f64],
    eps: &[f64],
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    n_total: usize,
) -> (f64, Vec<f64>, Vec<f64>) {
    let sigma: Vec<f64> = rho.iter().map(|&r| softplus(r)).collect();
    let w: Vec<f64> = (0..mu.len()).map(|i| mu[i] + sigma[i] * eps[i]).collect();
    let acts = arch.forward(&w, x);
    let out = acts.last().expect("output layer");
    let b = x.nrows() as f64;
    let n = n_total as f64;
    let s2 = cfg.noise_sigma * cfg.noise_sigma;
    let log_norm = cfg.noise_sigma.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln();
    let mut nll = 0.0;
    let d_out = DMatrix::from_fn(x.nrows(), 1, |i, _| {
        let r = out[(i, 0)] - y[i];
        nll += r * r / (2.0 * s2) + log_norm;
        r / (s2 * b)
    });
    let gw = arch.backward(&w, &acts, &d_out);
    let sp2 = cfg.prior_sigma * cfg.prior_sigma;
    let mut kl = 0.0;
    let mut g_mu = vec![0.0; mu.len()];
    let mut g_rho = vec![0.0; mu.len()];
    for i in 0..mu.len() {
        let s = sigma[i];
        kl += kl_gaussian(mu[i], s, cfg.prior_mu, cfg.prior_sigma);
        let ds = sigmoid(rho[i]);
        g_mu[i] = gw[i] + (mu[i] - cfg.prior_mu) / sp2 / n;
        g_rho[i] = gw[i] * eps[i] * ds + (-1.0 / s + s / sp2) * ds / n;
    }
    (nll / b + kl / n, g_mu, g_rho)
}

impl BnnModel {
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, cfg: &BnnConfig, seed: u64) -> Result<BnnModel> {
        if cfg.batch_size == 0
            || cfg.epochs == 0
            || !(cfg.learning_rate > 0.0)
            || !(cfg.prior_sigma > 0.0)
            || !(cfg.noise_sigma > 0.0)
        {
            return Err(Error::InvalidHyperparameter(format!("{cfg:?}")));
        }
        let mut sizes = vec![x.ncols()];
        sizes.extend(&cfg.hidden);
        sizes.push(1);
        let arch = Arch::new(sizes);
        let mut rng = seeded(seed);
        let p = arch.n_params();
        let mut theta = arch.init(&mut rng);
        theta.extend(std::iter::repeat(cfg.rho_init).take(p));
        let mut adam = Adam::new(2 * p, cfg.learning_rate);
        let mut order: Vec<usize> = (0..x.nrows()).collect();
        let mut eps = vec![0.0; p];
        let mut grad = vec![0.0; 2 * p];
        let (mut best, mut best_loss) = (theta.clone(), f64::INFINITY);
        let mut trace = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            rng::fisher_yates(&mut order, &mut rng);
            let mut total = 0.0;
            for chunk in order.chunks(cfg.batch_size) {
                for e in eps.iter_mut() {
                    *e = StandardNormal.sample(&mut rng);
                }
                let (xb, yb) = batch(x, y, chunk);
                let (mu, rho) = theta.split_at(p);
                let (loss, g_mu, g_rho) = neg_elbo_grad(&arch, cfg, mu, rho, &eps, &xb, &yb, x.nrows());
                if !loss.is_finite() {
                    return Err(Error::DivergedTraining { epoch });
                }
                total += loss * chunk.len() as f64;
                grad[..p].copy_from_slice(&g_mu);
                grad[p..].copy_from_slice(&g_rho);
                adam.step(&mut theta, &grad);
            }
            let epoch_loss = total / x.nrows() as f64;
            if epoch_loss < best_loss {
                best_loss = epoch_loss;
                best.copy_from_slice(&theta);
            }
            trace.push(best_loss);
        }
        let rho = best.split_off(p);
        Ok(BnnModel { config: cfg.clone(), arch, mu: best, rho, loss_trace: trace })
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.rho.iter().map(|&r| softplus(r)).collect()
    }

    pub fn kl(&self) -> f64 {
        self.mu
            .iter()
            .zip(self.sigma())
            .map(|(&m, s)| kl_gaussian(m, s, self.config.prior_mu, self.config.prior_sigma))
            .sum()
    }

    /// Set every posterior standard deviation to zero.
    pub fn collapse(&mut self) {
        self.rho.iter_mut().for_each(|r| *r = f64::NEG_INFINITY);
    }

    /// Output with the posterior means as weights.
    pub fn predict_mean_weights(&self, x: &DMatrix<f64>) -> DVector<f64> {
        self.arch.predict(&self.mu, x)
    }

    /// Monte Carlo predictive mean and sample standard deviation for one
    /// row, drawing a fresh weight vector per sample from `seed`.
    pub fn mc_row(&self, x: &[f64], n_samples: usize, seed: u64) -> (f64, f64) {
        let mut rng = seeded(seed);
        let sigma = self.sigma();
        let mut w = vec![0.0; self.mu.len()];
        let mut scratch = (Vec::new(), Vec::new());
        let mut outs = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            for i in 0..w.len() {
                let e: f64 = StandardNormal.sample(&mut rng);
                w[i] = self.mu[i] + sigma[i] * e;
            }
            outs.push(self.arch.forward_row(&w, x, &mut scratch));
        }
        if outs.iter().all(|&o| o == outs[0]) {
            return (outs[0], 0.0);
        }
        let mean = outs.iter().sum::<f64>() / n_samples as f64;
        let var = outs.iter().map(|o| (o - mean).powi(2)).sum::<f64>() / (n_samples - 1) as f64;
        (mean, var.sqrt())
    }

    /// Monte Carlo prediction for every row; row `i` uses seed
    /// `seed ^ point_ids[i]`, so results do not depend on row order.
    pub fn mc_predict(
        &self,
        x: &DMatrix<f64>,
        point_ids: &[usize],
        n_samples: usize,
        seed: u64,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        if n_samples < 2 {
            return Err(Error::InvalidHyperparameter(format!("mc_samples = {n_samples}; need at least 2")));
        }
        if point_ids.len() != x.nrows() {
            return Err(Error::LengthMismatch(format!("{} rows but {} ids", x.nrows(), point_ids.len())));
        }
        let res: Vec<(f64, f64)> = (0..x.nrows())
            .into_par_iter()
            .map(|i| {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                self.mc_row(&row, n_samples, seed ^ point_ids[i] as u64)
            })
            .collect();
        Ok((
            DVector::from_iterator(res.len(), res.iter().map(|r| r.0)),
            DVector::from_iterator(res.len(), res.iter().map(|r| r.1)),
        ))
    }
}
