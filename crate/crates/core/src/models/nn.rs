//! Fully connected networks over a flat parameter vector, with
//! hand-written reverse-mode gradients and an Adam optimizer.
//!
//! Layer `l` maps `sizes[l]` inputs to `sizes[l + 1]` outputs. Its weight
//! matrix (`out x in`, column-major) is stored first, then its bias. Hidden
//! layers apply the activation (ReLU by default); the output layer is linear.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn slope(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    w: usize,
    b: usize,
    n_in: usize,
    n_out: usize,
}

impl Arch {
    pub fn new(sizes: Vec<usize>) -> Self {
        assert!(sizes.len() >= 2, "a network needs an input and an output size");
        Arch { sizes, activation: Activation::default() }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    fn layers(&self) -> Vec<Layer> {
        let mut off = 0;
        self.sizes
            .windows(2)
            .map(|s| {
                let l = Layer { w: off, b: off + s[0] * s[1], n_in: s[0], n_out: s[1] };
                off += s[0] * s[1] + s[1];
                l
            })
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|s| s[0] * s[1] + s[1]).sum()
    }

    /// Weights `N(0, g/fan_in)` with `g = 2` for ReLU and 1 for tanh,
    /// biases zero.
    pub fn init(&self, rng: &mut Rng) -> Vec<f64> {
        let gain = match self.activation {
            Activation::Relu => 2.0,
            Activation::Tanh => 1.0,
        };
        let mut p = vec![0.0; self.n_params()];
        for l in self.layers() {
            let d = Normal::new(0.0, (gain / l.n_in as f64).sqrt()).expect("positive scale");
            for v in &mut p[l.w..l.b] {
                *v = d.sample(rng);
            }
        }
        p
    }

    /// Activations of every layer for a batch (`batch x sizes[l]`); the last
    /// entry is the network output.
    pub fn forward(&self, params: &[f64], x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let layers = self.layers();
        let mut acts = Vec::with_capacity(layers.len() + 1);
        acts.push(x.clone());
        for (k, l) in layers.iter().enumerate() {
            let w = DMatrix::from_column_slice(l.n_out, l.n_in, &params[l.w..l.b]);
            let mut z = &acts[k] * w.transpose();
            for (j, mut col) in z.column_iter_mut().enumerate() {
                col.add_scalar_mut(params[l.b + j]);
            }
            if k + 1 < layers.len() {
                let f = self.activation;
                z.apply(|v| *v = f.apply(*v));
            }
            acts.push(z);
        }
        acts
    }

    pub fn predict(&self, params: &[f64], x: &DMatrix<f64>) -> DVector<f64> {
        let out = self.forward(params, x).pop().expect("output layer");
        DVector::from_column_slice(out.as_slice())
    }

    /// Output for one input row, without heap allocation beyond `scratch`.
    pub fn forward_row(&self, params: &[f64], x: &[f64], scratch: &mut (Vec<f64>, Vec<f64>)) -> f64 {
        let layers = self.layers();
        let (a, z) = scratch;
        a.clear();
        a.extend_from_slice(x);
        for (k, l) in layers.iter().enumerate() {
            z.clear();
            z.extend_from_slice(&params[l.b..l.b + l.n_out]);
            for (i, &ai) in a.iter().enumerate() {
                let col = &params[l.w + i * l.n_out..l.w + (i + 1) * l.n_out];
                for (zo, &wo) in z.iter_mut().zip(col) {
                    *zo += wo * ai;
                }
            }
            if k + 1 < layers.len() {
                z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            std::mem::swap(a, z);
        }
        a[0]
    }

    /// Gradient of a scalar loss with respect to `params`, given the
    /// activations from [`Arch::forward`] and `d_out = ∂loss/∂output`.
    pub fn backward(&self, params: &[f64], acts: &[DMatrix<f64>], d_out: &DMatrix<f64>) -> Vec<f64> {
        let layers = self.layers();
        let mut grad = vec![0.0; params.len()];
        let mut dz = d_out.clone();
        for (k, l) in layers.iter().enumerate().rev() {
            let gw = dz.transpose() * &acts[k];
            grad[l.w..l.b].copy_from_slice(gw.as_slice());
            for (j, col) in dz.column_iter().enumerate() {
                grad[l.b + j] = col.sum();
            }
            if k > 0 {
                let w = DMatrix::from_column_slice(l.n_out, l.n_in, &params[l.w..l.b]);
                let mut da = &dz * w;
                let f = self.activation;
                da.zip_apply(&acts[k], |d, a| *d *= f.slope(a));
                dz = da;
            }
        }
        grad
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Rows of `x` and entries of `y` at `idx`.
pub(crate) fn batch(x: &DMatrix<f64>, y: &DVector<f64>, idx: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    (
        DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)]),
        DVector::from_fn(idx.len(), |i, _| y[idx[i]]),
    )
}
