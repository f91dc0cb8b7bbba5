//! Scoring AD measures: cumulative-error coverage, smoothed-error AUC and
//! cross-dataset ranking tables.
//!
//! Both curves are read over test points sorted by `(ad_value, point_id)`.
//! Coverage is the largest share of that ordering whose running mean error
//! stays at or below a percentile threshold of the absolute errors. The AUC
//! is the summed deviation of the moving-averaged error from the MAE.

mod plot;
mod table;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::AdScores;

pub use plot::{auc_csv, coverage_csv, curve_svg};
pub use table::{aggregate, BenchmarkTable, CellOutcome, CellResult};

pub const DEFAULT_PERCENTILE: f64 = 25.0;

/// Percentile with linear interpolation between order statistics: position
/// `q/100·(n−1)` in the sorted sample.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::DegenerateInput("percentile of an empty sample".into()));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::InvalidHyperparameter(format!("percentile {q} outside [0, 100]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    let frac = pos - lo as f64;
    Ok(v[lo] + frac * (v[hi] - v[lo]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub threshold: f64,
    pub percentile: f64,
    pub coverage_pct: f64,
    /// `(pct_scale, cumulative mean error)` along the AD ordering.
    pub cumulative_curve: Vec<(f64, f64)>,
}

/// Absolute errors in AD order.
pub fn sorted_errors(scores: &AdScores) -> Vec<f64> {
    scores.order().into_iter().map(|i| scores.abs_errors[i]).collect()
}

fn pct_scale(i: usize, n: usize) -> f64 {
    100.0 * (i + 1) as f64 / n as f64
}

/// Coverage with the threshold taken as the given percentile of the
/// scores' own absolute errors.
pub fn coverage(scores: &AdScores, percentile_q: f64) -> Result<CoverageResult> {
    if !(percentile_q > 0.0 && percentile_q < 100.0) {
        return Err(Error::InvalidHyperparameter(format!("percentile {percentile_q} outside (0, 100)")));
    }
    if scores.len() < 4 {
        return Err(Error::DegenerateInput(format!("coverage needs at least 4 points, got {}", scores.len())));
    }
    let threshold = percentile(&scores.abs_errors, percentile_q)?;
    coverage_at(scores, threshold, percentile_q)
}

/// Coverage against a fixed threshold, so every measure of one
/// (dataset, model) cell is judged against the same line.
pub fn coverage_at(scores: &AdScores, threshold: f64, percentile_q: f64) -> Result<CoverageResult> {
    let n = scores.len();
    if n < 4 {
        return Err(Error::DegenerateInput(format!("coverage needs at least 4 points, got {n}")));
    }
    let mut sum = 0.0;
    let mut covered = 0.0;
    let cumulative_curve = sorted_errors(scores)
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            sum += e;
            let cum = sum / (i + 1) as f64;
            if cum <= threshold {
                covered = pct_scale(i, n);
            }
            (pct_scale(i, n), cum)
        })
        .collect();
    Ok(CoverageResult { threshold, percentile: percentile_q, coverage_pct: covered, cumulative_curve })
}

/// Uniform moving average of odd width. Edges are padded by mirroring the
/// series including its end sample, so `[1,2,3]` pads to `[.., 2,1, 1,2,3, 3,2, ..]`.
/// This keeps the output length and the sum of the series.
pub fn moving_average(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window % 2 == 0 {
        return Err(Error::EvenWindow(window));
    }
    let n = values.len();
    if window > 2 * n.max(1) - 1 {
        return Err(Error::WindowTooLarge { window, len: n });
    }
    let h = (window - 1) / 2;
    let at = |j: isize| -> f64 {
        let n = n as isize;
        let k = if j < 0 {
            -j - 1
        } else if j >= n {
            2 * n - 1 - j
        } else {
            j
        };
        values[k as usize]
    };
    Ok((0..n as isize)
        .map(|i| (i - h as isize..=i + h as isize).map(at).sum::<f64>() / window as f64)
        .collect())
}

/// Nearest odd integer to `max(5, 0.05·n_test)`, halves rounding up.
pub fn default_window(n_test: usize) -> usize {
    let v = (0.05 * n_test as f64).max(5.0);
    let w = ((v - 1.0) / 2.0).round() as usize * 2 + 1;
    w.min((2 * n_test).saturating_sub(1).max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucResult {
    pub window: usize,
    pub smoothed_curve: Vec<f64>,
    pub e_avg: f64,
    pub raw_auc: f64,
    /// NaN until [`scale_auc`] has seen the whole cell.
    pub scaled_auc: f64,
}

pub fn auc(scores: &AdScores, window: usize, e_avg: f64) -> Result<AucResult> {
    let smoothed_curve = moving_average(&sorted_errors(scores), window)?;
    let raw_auc = smoothed_curve.iter().map(|s| (s - e_avg).abs()).sum();
    Ok(AucResult { window, smoothed_curve, e_avg, raw_auc, scaled_auc: f64::NAN })
}

/// Min-max scale the raw AUCs of one (dataset, model) cell in place.
pub fn scale_auc(cell: &mut [AucResult]) {
    let raws: Vec<f64> = cell.iter().map(|r| r.raw_auc).collect();
    scale_values(&raws).into_iter().zip(cell.iter_mut()).for_each(|(s, r)| r.scaled_auc = s);
}

/// `(v − min)/(max − min)`; all zeros when the values do not spread.
pub fn scale_values(values: &[f64]) -> Vec<f64> {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if values.len() < 2 || max <= min {
        warn!("degenerate AUC scale over {} values: all mapped to 0", values.len());
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - min) / (max - min)).collect()
}
