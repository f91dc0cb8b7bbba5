use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

/// Offset applied to the run seed for subsampling so that the subsample
/// permutation and the split permutation come from different streams.
const SUBSAMPLE_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
    pub train_fraction: f64,
    /// Row positions (into the split input) of each side.
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// Shuffle rows with a seeded Fisher–Yates permutation and cut it into
/// `floor(n·fraction)` training rows and the remaining test rows.
pub fn split(d: &Dataset, seed: u64, train_fraction: f64) -> Result<SplitDataset> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::DegenerateSplit(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n = d.n_rows();
    if n < 10 {
        return Err(Error::DegenerateSplit(format!("{n} rows; at least 10 required")));
    }
    // The epsilon keeps products such as 10 * 0.7 = 6.999... from flooring down.
    let n_train = ((n as f64) * train_fraction + 1e-9).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::DegenerateSplit(format!(
            "{n} rows at fraction {train_fraction} leaves one side empty"
        )));
    }
    let perm = rng::permutation(n, seed);
    let train_idx = perm[..n_train].to_vec();
    let test_idx = perm[n_train..].to_vec();
    Ok(SplitDataset {
        train: d.select_rows(&train_idx),
        test: d.select_rows(&test_idx),
        seed,
        train_fraction,
        train_idx,
        test_idx,
    })
}

/// Keep `n` rows chosen by a seeded permutation; a no-op when `n >= n_rows`.
pub fn subsample(d: &Dataset, n: usize, seed: u64) -> Dataset {
    if n >= d.n_rows() {
        return d.clone();
    }
    let perm = rng::permutation(d.n_rows(), seed.wrapping_add(SUBSAMPLE_STREAM));
    d.select_rows(&perm[..n])
}
