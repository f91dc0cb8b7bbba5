//! Straightforward reference versions of the AD measures, written from the
//! definitions with plain vectors and full sorts. Shared by the core
//! integration tests and the acceptance runner.
#![allow(dead_code)]

pub type Rows = Vec<Vec<f64>>;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// All training indices ordered by distance to `q`, then by index.
fn by_distance(train: &Rows, q: &[f64]) -> Vec<(usize, f64)> {
    let mut d: Vec<(usize, f64)> = train.iter().enumerate().map(|(i, t)| (i, dist(t, q))).collect();
    d.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    d
}

pub fn kappa(train: &Rows, q: &[f64], k: usize) -> f64 {
    by_distance(train, q)[k - 1].1
}

pub fn min_kappa(train: &Rows, q: &[f64]) -> f64 {
    train.iter().map(|t| dist(t, q)).fold(f64::INFINITY, f64::min)
}

pub fn gamma(train: &Rows, q: &[f64], k: usize) -> f64 {
    by_distance(train, q)[..k].iter().map(|p| p.1).sum::<f64>() / k as f64
}

pub fn delta(train: &Rows, q: &[f64], k: usize) -> f64 {
    let nb = by_distance(train, q);
    let mut mean = vec![0.0; q.len()];
    for &(i, _) in &nb[..k] {
        for j in 0..q.len() {
            mean[j] += (train[i][j] - q[j]) / k as f64;
        }
    }
    mean.iter().map(|m| m * m).sum::<f64>().sqrt()
}

pub fn cosine(train: &Rows, q: &[f64], k: usize) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb = by_distance(train, q);
    nb[..k]
        .iter()
        .map(|&(i, _)| {
            let t = &train[i];
            let dot: f64 = t.iter().zip(q).map(|(a, b)| a * b).sum();
            1.0 - dot / (norm(t) * norm(q))
        })
        .sum::<f64>()
        / k as f64
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &Rows) -> Rows {
    let n = a.len();
    let mut m: Rows = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().partial_cmp(&m[y][c].abs()).unwrap()).unwrap();
        m.swap(c, p);
        let d = m[c][c];
        for v in m[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                let pivot = m[c].clone();
                for (v, pv) in m[r].iter_mut().zip(&pivot) {
                    *v -= f * pv;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn leverage(train: &Rows, q: &[f64]) -> f64 {
    let p = q.len();
    let gram: Rows = (0..p)
        .map(|a| (0..p).map(|b| train.iter().map(|t| t[a] * t[b]).sum()).collect())
        .collect();
    let inv = invert(&gram);
    (0..p).map(|a| (0..p).map(|b| q[a] * inv[a][b] * q[b]).sum::<f64>()).sum()
}

/// Rank of each entry counting ties as half: `1 + #less + #equal_others/2`.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let eq = v.iter().enumerate().filter(|&(j, &y)| j != i && y == x).count() as f64;
            1.0 + less + eq / 2.0
        })
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}

/// `1 − max_t ρ(member predictions at q, member predictions at t)`.
pub fn correll(train_member_preds: &Rows, query_member_preds: &[f64]) -> f64 {
    let best = train_member_preds
        .iter()
        .map(|t| spearman(query_member_preds, t))
        .fold(f64::NEG_INFINITY, f64::max);
    1.0 - best
}

/// Prefix means of `errors` ordered by `(ad, index)`.
pub fn cumulative_means(ad: &[f64], errors: &[f64], ids: &[usize]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..ad.len()).collect();
    idx.sort_by(|&a, &b| ad[a].partial_cmp(&ad[b]).unwrap().then(ids[a].cmp(&ids[b])));
    (1..=idx.len()).map(|m| idx[..m].iter().map(|&i| errors[i]).sum::<f64>() / m as f64).collect()
}
