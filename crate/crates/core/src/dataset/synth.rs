//! One-dimensional synthetic regression tasks with an in-domain training
//! interval `[-1, 1]` and an optional out-of-domain test interval `[2, 3]`.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::rng::{seeded, uniform_unit};

pub const LINEAR_SLOPE: f64 = 2.0;
pub const LINEAR_INTERCEPT: f64 = 1.0;
pub const TRAIN_RANGE: (f64, f64) = (-1.0, 1.0);
pub const EXTRAPOLATION_RANGE: (f64, f64) = (2.0, 3.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Sine,
    Linear,
    Step,
}

impl std::str::FromStr for SynthKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sine" => Ok(SynthKind::Sine),
            "linear" => Ok(SynthKind::Linear),
            "step" => Ok(SynthKind::Step),
            other => Err(format!("unknown synthetic kind `{other}` (sine, linear, step)")),
        }
    }
}

impl SynthKind {
    /// Noise-free response.
    pub fn response(self, x: f64) -> f64 {
        match self {
            SynthKind::Sine => (std::f64::consts::PI * x).sin(),
            SynthKind::Linear => LINEAR_SLOPE * x + LINEAR_INTERCEPT,
            SynthKind::Step => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub train: Dataset,
    pub test: Dataset,
    /// `true` for test rows drawn from the extrapolation interval.
    pub extrapolated: Vec<bool>,
}

/// `n` training points uniform on `[-1, 1]` and `n / 2` test points. With
/// `extrapolate` the first half of the test rows lies in `[-1, 1]` and the
/// rest in `[2, 3]`; otherwise all test rows are in range. Test row ids
/// continue after the training ids.
pub fn generate(kind: SynthKind, n: usize, noise: f64, extrapolate: bool, seed: u64) -> SynthData {
    let mut rng = seeded(seed);
    let draw = |lo: f64, hi: f64, rng: &mut crate::rng::Rng| {
        let x = lo + (hi - lo) * uniform_unit(rng);
        let e: f64 = rng.sample(StandardNormal);
        (x, kind.response(x) + noise * e)
    };
    let train: Vec<(f64, f64)> = (0..n).map(|_| draw(TRAIN_RANGE.0, TRAIN_RANGE.1, &mut rng)).collect();
    let n_test = n / 2;
    let n_in = if extrapolate { n_test - n_test / 2 } else { n_test };
    let mut test = Vec::with_capacity(n_test);
    let mut extrapolated = Vec::with_capacity(n_test);
    for i in 0..n_test {
        let out = i >= n_in;
        let (lo, hi) = if out { EXTRAPOLATION_RANGE } else { TRAIN_RANGE };
        test.push(draw(lo, hi, &mut rng));
        extrapolated.push(out);
    }
    let to_dataset = |pts: &[(f64, f64)], offset: usize| {
        let mut d = Dataset::from_matrix(
            format!("synth_{}", format!("{kind:?}").to_lowercase()),
            DMatrix::from_fn(pts.len(), 1, |i, _| pts[i].0),
            DVector::from_fn(pts.len(), |i, _| pts[i].1),
        );
        d.feature_names = vec!["x".into()];
        d.row_ids = (offset..offset + pts.len()).collect();
        d
    };
    SynthData {
        train: to_dataset(&train, 0),
        test: to_dataset(&test, n),
        extrapolated,
    }
}
