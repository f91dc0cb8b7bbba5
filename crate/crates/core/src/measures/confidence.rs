//! Spread of member predictions and rank-correlation dissimilarity.

use log::warn;
use nalgebra::DMatrix;

/// Sample standard deviation (`n − 1` denominator) of each column of an
/// `n_members x n_rows` prediction matrix. A single member gives 0.
pub fn member_sd(preds: &DMatrix<f64>) -> Vec<f64> {
    let m = preds.nrows();
    if m < 2 {
        warn!("spread of a single member is defined as 0");
        return vec![0.0; preds.ncols()];
    }
    preds
        .column_iter()
        .map(|c| {
            // shifted by the first member so identical members give exactly 0
            let d: Vec<f64> = c.iter().map(|v| v - c[0]).collect();
            let mean = d.iter().sum::<f64>() / m as f64;
            (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
        })
        .collect()
}

/// Ranks starting at 1, ties sharing the average of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && v[idx[j]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Centered, unit-length rank vector; `None` for a constant input.
pub fn normalized_ranks(v: &[f64]) -> Option<Vec<f64>> {
    let r = average_ranks(v);
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    let c: Vec<f64> = r.iter().map(|x| x - mean).collect();
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        None
    } else {
        Some(c.into_iter().map(|x| x / norm).collect())
    }
}

/// Spearman correlation; 0 when either vector is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    match (normalized_ranks(a), normalized_ranks(b)) {
        (Some(x), Some(y)) => x.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>().clamp(-1.0, 1.0),
        _ => 0.0,
    }
}

/// `1 − max_i ρ(q, t_i)` given precomputed normalized training rank vectors.
pub fn correll_score(train_ranks: &[Option<Vec<f64>>], query: &[f64]) -> f64 {
    let best = match normalized_ranks(query) {
        None => 0.0,
        Some(q) => train_ranks
            .iter()
            .map(|t| match t {
                Some(t) => t.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0),
                None => 0.0,
            })
            .fold(f64::NEG_INFINITY, f64::max),
    };
    let best = if train_ranks.is_empty() { 0.0 } else { best };
    1.0 - best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sd_hand_value() {
        let p = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        assert_eq!(member_sd(&p), vec![1.0]);
        assert_eq!(member_sd(&DMatrix::from_element(1, 4, 2.0)), vec![0.0; 4]);
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn spearman_extremes() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 300.0]) - 1.0).abs() < 1e-15);
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), 0.0);
    }

    #[test]
    fn correll_hand_values() {
        let t = vec![normalized_ranks(&[3.0, 2.0, 1.0])];
        assert!((correll_score(&t, &[1.0, 2.0, 3.0]) - 2.0).abs() < 1e-15);
        let t = vec![normalized_ranks(&[1.0, 2.0, 3.0])];
        assert!(correll_score(&t, &[1.0, 2.0, 3.0]).abs() < 1e-15);
    }
}
