//! Distance-based novelty measures over the `k` nearest training rows.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Indices and Euclidean distances of the `k` nearest rows of `train`,
/// nearest first; equal distances keep the lower row index first.
pub fn nearest(train: &DMatrix<f64>, x: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut d: Vec<(usize, f64)> = (0..train.nrows())
        .map(|i| {
            let s: f64 = x.iter().enumerate().map(|(j, v)| (train[(i, j)] - v).powi(2)).sum();
            (i, s.sqrt())
        })
        .collect();
    let by_dist = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k < d.len() {
        d.select_nth_unstable_by(k, by_dist);
        d.truncate(k);
    }
    d.sort_by(by_dist);
    d
}

/// Distance to the `k`-th nearest training row.
pub fn kappa(nb: &[(usize, f64)]) -> f64 {
    nb.last().map_or(0.0, |n| n.1)
}

/// Distance to the nearest training row.
pub fn min_kappa(nb: &[(usize, f64)]) -> f64 {
    nb.first().map_or(0.0, |n| n.1)
}

/// Mean distance to the `k` nearest rows.
pub fn gamma(nb: &[(usize, f64)]) -> f64 {
    nb.iter().map(|n| n.1).sum::<f64>() / nb.len() as f64
}

/// Length of the mean displacement vector from `x` to its neighbors.
pub fn delta(train: &DMatrix<f64>, x: &[f64], nb: &[(usize, f64)]) -> f64 {
    let k = nb.len() as f64;
    x.iter()
        .enumerate()
        .map(|(j, v)| {
            let m = nb.iter().map(|n| train[(n.0, j)] - v).sum::<f64>() / k;
            m * m
        })
        .sum::<f64>()
        .sqrt()
}

/// Mean of `1 − cos(x, x_b)` over the neighbors.
pub fn cosine(train: &DMatrix<f64>, x: &[f64], nb: &[(usize, f64)]) -> Result<f64> {
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut total = 0.0;
    for &(i, _) in nb {
        let row = train.row(i);
        let nb_norm = row.norm();
        if nb_norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        let dot: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
        let cos = (dot / (nx * nb_norm)).clamp(-1.0, 1.0);
        total += 1.0 - cos;
    }
    Ok(total / nb.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> DMatrix<f64> {
        DMatrix::from_column_slice(5, 1, &[0.0, 1.0, 2.0, 3.0, 4.0])
    }

    #[test]
    fn hand_values_on_a_line() {
        let t = line();
        let nb = nearest(&t, &[0.0], 5);
        assert_eq!(kappa(&nb), 4.0);
        assert_eq!(gamma(&nb), 2.0);
        let nb = nearest(&t, &[2.4], 5);
        assert!((min_kappa(&nb) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn delta_hand_value() {
        let t = DMatrix::from_column_slice(2, 1, &[1.0, 3.0]);
        let nb = nearest(&t, &[0.0], 2);
        assert_eq!(delta(&t, &[0.0], &nb), 2.0);
    }

    #[test]
    fn cosine_hand_values() {
        let t = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        assert_eq!(cosine(&t, &[1.0, 0.0], &nearest(&t, &[1.0, 0.0], 1)).unwrap(), 1.0);
        let t = DMatrix::from_row_slice(1, 2, &[-1.0, 0.0]);
        assert_eq!(cosine(&t, &[1.0, 0.0], &nearest(&t, &[1.0, 0.0], 1)).unwrap(), 2.0);
        let t = DMatrix::from_row_slice(1, 2, &[3.0, 0.0]);
        assert_eq!(cosine(&t, &[1.0, 0.0], &nearest(&t, &[1.0, 0.0], 1)).unwrap(), 0.0);
        assert!(matches!(cosine(&t, &[0.0, 0.0], &nearest(&t, &[0.0, 0.0], 1)), Err(Error::ZeroVector)));
    }

    #[test]
    fn centroid_has_zero_delta() {
        let t = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let nb = nearest(&t, &[0.0, 0.0], 4);
        assert_eq!(delta(&t, &[0.0, 0.0], &nb), 0.0);
    }
}
