mod oracle;

use adbench::dataset::Dataset;
use adbench::measures::{fit_measure, MeasureConfig, MeasureKind, Members, ModelContext};
use adbench::models::{Ensemble, MemberPredictions, ModelKind, Params};
use adbench::rng::{seeded, uniform_below, uniform_unit};
use nalgebra::{DMatrix, DVector};

struct Instance {
    train: Dataset,
    queries: DMatrix<f64>,
}

fn instance(seed: u64) -> Instance {
    let mut r = seeded(seed);
    let n = 6 + uniform_below(&mut r, 45) as usize;
    let d = 1 + uniform_below(&mut r, 5) as usize;
    let mut u = |_: usize, _: usize| 4.0 * uniform_unit(&mut r) - 2.0;
    let x = DMatrix::from_fn(n, d, &mut u);
    let q = DMatrix::from_fn(8, d, &mut u);
    let y = DVector::from_fn(n, |i, _| x.row(i).sum() + 0.1 * (i as f64).sin());
    Instance { train: Dataset::from_matrix("rand", x, y), queries: q }
}

fn rows(m: &DMatrix<f64>) -> oracle::Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn close(a: f64, b: f64, what: &str) {
    assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{what}: {a} vs {b}");
}

#[test]
fn novelty_measures_match_brute_force() {
    for seed in 0..100 {
        let inst = instance(seed);
        let t = rows(&inst.train.features);
        let q = rows(&inst.queries);
        let ids: Vec<usize> = (0..q.len()).collect();
        let cfg = MeasureConfig::default();
        for kind in [
            MeasureKind::Kappa,
            MeasureKind::MinKappa,
            MeasureKind::Gamma,
            MeasureKind::Delta,
            MeasureKind::Cosine,
            MeasureKind::Leverage,
        ] {
            let m = fit_measure(kind, &inst.train, ModelContext::default(), cfg).unwrap();
            let got = m.score(&inst.queries, &ids).unwrap();
            for (i, qi) in q.iter().enumerate() {
                let want = match kind {
                    MeasureKind::Kappa => oracle::kappa(&t, qi, 5),
                    MeasureKind::MinKappa => oracle::min_kappa(&t, qi),
                    MeasureKind::Gamma => oracle::gamma(&t, qi, 5),
                    MeasureKind::Delta => oracle::delta(&t, qi, 5),
                    MeasureKind::Cosine => oracle::cosine(&t, qi, 5),
                    _ => oracle::leverage(&t, qi),
                };
                close(got[i], want, &format!("{kind} seed {seed}"));
            }
        }
    }
}

#[test]
fn correll_matches_brute_force() {
    for seed in 0..100 {
        let inst = instance(seed);
        let e = Ensemble::fit(ModelKind::DecisionTree, &Params::new(), &inst.train.features, &inst.train.target, 5, seed).unwrap();
        let members = Members::Bagged(e);
        let ctx = ModelContext { members: Some(&members), ..Default::default() };
        let m = fit_measure(MeasureKind::Correll, &inst.train, ctx, MeasureConfig::default()).unwrap();
        let ids: Vec<usize> = (0..inst.queries.nrows()).collect();
        let got = m.score(&inst.queries, &ids).unwrap();
        let tp = members.predict_members(&inst.train.features).unwrap();
        let qp = members.predict_members(&inst.queries).unwrap();
        let train_cols: oracle::Rows = tp.column_iter().map(|c| c.iter().copied().collect()).collect();
        for i in 0..ids.len() {
            let q: Vec<f64> = qp.column(i).iter().copied().collect();
            close(got[i], oracle::correll(&train_cols, &q), &format!("correll seed {seed}"));
        }
    }
}
