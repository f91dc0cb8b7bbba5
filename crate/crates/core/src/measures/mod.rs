//! Applicability-domain measures. Larger values mean a test point is
//! expected to be predicted less accurately.
//!
//! Novelty measures (`kappa`, `min_kappa`, `gamma`, `delta`, `cosine`,
//! `leverage`) look only at training inputs. Confidence measures
//! (`ensemble_sd`, `correll`, `gpr_var`, `rf_sd`, `bnn_sd`) need a fitted
//! model passed through [`ModelContext`].

pub mod confidence;
pub mod knn;
mod scores;

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::{BnnModel, Ensemble, EvalReport, GprModel, MemberPredictions, RandomForest};

pub use scores::{read_scores_csv, write_scores_csv, AdScores};

pub const DUMP_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Kappa,
    MinKappa,
    Gamma,
    Delta,
    Cosine,
    Leverage,
    EnsembleSd,
    Correll,
    GprVar,
    RfSd,
    BnnSd,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 11] = [
        MeasureKind::Kappa,
        MeasureKind::MinKappa,
        MeasureKind::Gamma,
        MeasureKind::Delta,
        MeasureKind::Cosine,
        MeasureKind::Leverage,
        MeasureKind::EnsembleSd,
        MeasureKind::Correll,
        MeasureKind::GprVar,
        MeasureKind::RfSd,
        MeasureKind::BnnSd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MeasureKind::Kappa => "kappa",
            MeasureKind::MinKappa => "min_kappa",
            MeasureKind::Gamma => "gamma",
            MeasureKind::Delta => "delta",
            MeasureKind::Cosine => "cosine",
            MeasureKind::Leverage => "leverage",
            MeasureKind::EnsembleSd => "ensemble_sd",
            MeasureKind::Correll => "correll",
            MeasureKind::GprVar => "gpr_var",
            MeasureKind::RfSd => "rf_sd",
            MeasureKind::BnnSd => "bnn_sd",
        }
    }

    pub fn uses_neighbors(self) -> bool {
        matches!(
            self,
            MeasureKind::Kappa | MeasureKind::MinKappa | MeasureKind::Gamma | MeasureKind::Delta | MeasureKind::Cosine
        )
    }

    pub fn is_novelty(self) -> bool {
        self.uses_neighbors() || self == MeasureKind::Leverage
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeasureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        MeasureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidHyperparameter(format!("unknown measure kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    pub k: usize,
    /// Prepend a ones column before computing leverages.
    pub intercept: bool,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig { k: 5, intercept: false, mc_samples: 1000, seed: 0 }
    }
}

/// Members whose prediction spread or rank pattern a measure reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Members {
    Bagged(Ensemble),
    Forest(RandomForest),
}

impl MemberPredictions for Members {
    fn n_members(&self) -> usize {
        match self {
            Members::Bagged(e) => e.n_members(),
            Members::Forest(f) => MemberPredictions::n_members(f),
        }
    }

    fn predict_members(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            Members::Bagged(e) => e.predict_members(x),
            Members::Forest(f) => MemberPredictions::predict_members(f, x),
        }
    }
}

/// Fitted models a confidence measure may draw on.
#[derive(Debug, Default, Clone, Copy)]
pub struct ModelContext<'a> {
    pub members: Option<&'a Members>,
    pub forest: Option<&'a RandomForest>,
    pub gpr: Option<&'a GprModel>,
    pub bnn: Option<&'a BnnModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureState {
    Neighbors { train: DMatrix<f64> },
    Leverage { inv_gram: DMatrix<f64> },
    Spread { members: Members },
    Correll { members: Members, train_ranks: Vec<Option<Vec<f64>>> },
    Gpr { model: GprModel },
    Bnn { model: BnnModel },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdMeasure {
    pub kind: MeasureKind,
    pub config: MeasureConfig,
    pub state: MeasureState,
}

#[derive(Serialize, Deserialize)]
struct MeasureDump {
    format_version: u32,
    measure: AdMeasure,
}

fn missing(kind: MeasureKind, needs: &str) -> Error {
    Error::MissingModelContext { measure: kind.as_str().to_string(), needs: needs.to_string() }
}

fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

/// `(XᵀX)⁻¹`, with diagonal jitter `1e-8·trace/p` when `XᵀX` is
/// numerically rank deficient.
fn inverse_gram(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut g = x.transpose() * x;
    let p = g.nrows();
    let eig = SymmetricEigen::new(g.clone());
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        return Err(Error::SingularGram);
    }
    if min <= max * 1e-12 {
        let jitter = 1e-8 * g.trace() / p as f64;
        warn!("rank-deficient XᵀX: adding jitter {jitter:e}");
        for i in 0..p {
            g[(i, i)] += jitter;
        }
    }
    g.cholesky().map(|c| c.inverse()).ok_or(Error::SingularGram)
}

pub fn fit_measure(kind: MeasureKind, train: &Dataset, ctx: ModelContext<'_>, config: MeasureConfig) -> Result<AdMeasure> {
    let x = &train.features;
    let state = match kind {
        k if k.uses_neighbors() => {
            if config.k == 0 || config.k > x.nrows() {
                return Err(Error::KTooLarge { k: config.k, n: x.nrows() });
            }
            MeasureState::Neighbors { train: x.clone() }
        }
        MeasureKind::Leverage => {
            let xm = if config.intercept { with_intercept(x) } else { x.clone() };
            MeasureState::Leverage { inv_gram: inverse_gram(&xm)? }
        }
        MeasureKind::EnsembleSd => {
            MeasureState::Spread { members: ctx.members.ok_or_else(|| missing(kind, "ensemble"))?.clone() }
        }
        MeasureKind::RfSd => {
            let f = ctx.forest.ok_or_else(|| missing(kind, "random_forest"))?;
            MeasureState::Spread { members: Members::Forest(f.clone()) }
        }
        MeasureKind::Correll => {
            let members = ctx.members.ok_or_else(|| missing(kind, "ensemble"))?.clone();
            let preds = members.predict_members(x)?;
            let train_ranks = preds
                .column_iter()
                .map(|c| confidence::normalized_ranks(c.as_slice()))
                .collect();
            MeasureState::Correll { members, train_ranks }
        }
        MeasureKind::GprVar => MeasureState::Gpr { model: ctx.gpr.ok_or_else(|| missing(kind, "gpr"))?.clone() },
        MeasureKind::BnnSd => {
            if config.mc_samples < 2 {
                return Err(Error::InvalidHyperparameter("mc_samples must be at least 2".into()));
            }
            MeasureState::Bnn { model: ctx.bnn.ok_or_else(|| missing(kind, "bnn"))?.clone() }
        }
        _ => unreachable!("neighbor kinds handled above"),
    };
    Ok(AdMeasure { kind, config, state })
}

impl AdMeasure {
    /// AD values for the rows of `x`. `point_ids` only affect `bnn_sd`,
    /// whose Monte Carlo draws for a row are seeded by `seed ^ point_id`.
    pub fn score(&self, x: &DMatrix<f64>, point_ids: &[usize]) -> Result<DVector<f64>> {
        if point_ids.len() != x.nrows() {
            return Err(Error::LengthMismatch(format!("{} rows, {} ids", x.nrows(), point_ids.len())));
        }
        let rows = |x: &DMatrix<f64>| -> Vec<Vec<f64>> { (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect() };
        let values: Vec<f64> = match &self.state {
            MeasureState::Neighbors { train } => {
                self.check_width(train.ncols(), x)?;
                rows(x)
                    .par_iter()
                    .map(|q| {
                        let nb = knn::nearest(train, q, self.config.k);
                        Ok(match self.kind {
                            MeasureKind::Kappa => knn::kappa(&nb),
                            MeasureKind::MinKappa => knn::min_kappa(&nb),
                            MeasureKind::Gamma => knn::gamma(&nb),
                            MeasureKind::Delta => knn::delta(train, q, &nb),
                            _ => knn::cosine(train, q, &nb)?,
                        })
                    })
                    .collect::<Result<_>>()?
            }
            MeasureState::Leverage { inv_gram } => {
                let xm = if self.config.intercept { with_intercept(x) } else { x.clone() };
                self.check_width(inv_gram.ncols(), &xm)?;
                let t = &xm * inv_gram;
                (0..xm.nrows()).map(|i| t.row(i).dot(&xm.row(i)).max(0.0)).collect()
            }
            MeasureState::Spread { members } => confidence::member_sd(&members.predict_members(x)?),
            MeasureState::Correll { members, train_ranks } => {
                let preds = members.predict_members(x)?;
                (0..x.nrows())
                    .into_par_iter()
                    .map(|i| {
                        let q: Vec<f64> = preds.column(i).iter().copied().collect();
                        confidence::correll_score(train_ranks, &q)
                    })
                    .collect()
            }
            MeasureState::Gpr { model } => {
                self.check_width(model.x_train.ncols(), x)?;
                model.predict_var(x)?.1.iter().copied().collect()
            }
            MeasureState::Bnn { model } => {
                self.check_width(model.arch.sizes[0], x)?;
                model.mc_predict(x, point_ids, self.config.mc_samples, self.config.seed)?.1.iter().copied().collect()
            }
        };
        Ok(DVector::from_vec(values))
    }

    fn check_width(&self, expected: usize, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != expected {
            return Err(Error::SchemaMismatch(format!("measure expects {expected} features, got {}", x.ncols())));
        }
        Ok(())
    }

    /// AD value of a single point.
    pub fn score_point(&self, x: &[f64], point_id: usize) -> Result<f64> {
        Ok(self.score(&DMatrix::from_row_slice(1, x.len(), x), &[point_id])?[0])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MeasureDump { format_version: DUMP_FORMAT_VERSION, measure: self.clone() })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let found = v.get("format_version").and_then(|f| f.as_u64()).unwrap_or(0) as u32;
        if found != DUMP_FORMAT_VERSION {
            return Err(Error::VersionMismatch { expected: DUMP_FORMAT_VERSION, found });
        }
        let mut dump: MeasureDump = serde_json::from_value(v)?;
        if let MeasureState::Gpr { model } = &mut dump.measure.state {
            model.rebuild()?;
        }
        Ok(dump.measure)
    }
}

/// Score every test row and pair it with its absolute error.
pub fn score_all(m: &AdMeasure, test: &Dataset, eval: &EvalReport) -> Result<AdScores> {
    if test.n_rows() == 0 {
        return Err(Error::DegenerateInput("empty test set".into()));
    }
    if eval.abs_errors.len() != test.n_rows() {
        return Err(Error::LengthMismatch(format!(
            "{} test rows, {} errors",
            test.n_rows(),
            eval.abs_errors.len()
        )));
    }
    let values = m.score(&test.features, &test.row_ids)?;
    AdScores::new(
        m.kind.as_str(),
        test.row_ids.clone(),
        values.iter().copied().collect(),
        eval.abs_errors.iter().copied().collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelKind, Params};

    fn train(n: usize, p: usize) -> Dataset {
        Dataset::from_matrix(
            "t",
            DMatrix::from_fn(n, p, |i, j| ((i * 7 + j * 3) % 13) as f64 * 0.25 - 1.0 + j as f64 * 0.01 * i as f64),
            DVector::from_fn(n, |i, _| i as f64 * 0.1),
        )
    }

    #[test]
    fn k_larger_than_train() {
        let err = fit_measure(MeasureKind::Kappa, &train(4, 2), ModelContext::default(), MeasureConfig::default());
        assert!(matches!(err, Err(Error::KTooLarge { k: 5, n: 4 })));
        assert!(fit_measure(MeasureKind::Kappa, &train(10, 2), ModelContext::default(), MeasureConfig::default()).is_ok());
    }

    #[test]
    fn missing_context() {
        for kind in [MeasureKind::EnsembleSd, MeasureKind::Correll, MeasureKind::GprVar, MeasureKind::RfSd, MeasureKind::BnnSd] {
            let r = fit_measure(kind, &train(10, 2), ModelContext::default(), MeasureConfig::default());
            assert!(matches!(r, Err(Error::MissingModelContext { .. })), "{kind}");
        }
    }

    #[test]
    fn leverage_identity_and_trace() {
        let d = Dataset::from_matrix("t", DMatrix::identity(2, 2), DVector::zeros(2));
        let m = fit_measure(MeasureKind::Leverage, &d, ModelContext::default(), MeasureConfig::default()).unwrap();
        assert!((m.score_point(&[1.0, 0.0], 0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(m.score_point(&[0.0, 0.0], 0).unwrap(), 0.0);
        let d = train(20, 3);
        for intercept in [false, true] {
            let cfg = MeasureConfig { intercept, ..Default::default() };
            let m = fit_measure(MeasureKind::Leverage, &d, ModelContext::default(), cfg).unwrap();
            let h = m.score(&d.features, &d.row_ids).unwrap();
            assert!((h.sum() - (3 + intercept as usize) as f64).abs() < 1e-8);
            assert!(h.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
        }
    }

    #[test]
    fn duplicate_training_point() {
        let mut d = train(12, 2);
        for i in 0..5 {
            d.features[(i, 0)] = 0.7;
            d.features[(i, 1)] = -0.3;
        }
        let q = [0.7, -0.3];
        for kind in [MeasureKind::Kappa, MeasureKind::MinKappa, MeasureKind::Cosine] {
            let m = fit_measure(kind, &d, ModelContext::default(), MeasureConfig::default()).unwrap();
            assert!(m.score_point(&q, 0).unwrap().abs() < 1e-15, "{kind}");
        }
    }

    #[test]
    fn rf_sd_equals_spread_of_same_trees() {
        let d = train(30, 2);
        let f = RandomForest::fit(&d.features, &d.target, 7, Default::default(), 1);
        let members = Members::Forest(f.clone());
        let ctx = ModelContext { members: Some(&members), forest: Some(&f), ..Default::default() };
        let a = fit_measure(MeasureKind::RfSd, &d, ctx, MeasureConfig::default()).unwrap();
        let b = fit_measure(MeasureKind::EnsembleSd, &d, ctx, MeasureConfig::default()).unwrap();
        let q = DMatrix::from_fn(50, 2, |i, j| (i as f64 * 0.13 + j as f64).sin() * 2.0);
        let ids: Vec<usize> = (0..50).collect();
        assert_eq!(a.score(&q, &ids).unwrap(), b.score(&q, &ids).unwrap());
    }

    #[test]
    fn identical_members_have_zero_spread_and_correll() {
        let d = train(15, 2);
        let e = Ensemble::fit_with(ModelKind::Ridge, &Params::new(), &d.features, &d.target, 4, 0, false).unwrap();
        let members = Members::Bagged(e);
        let ctx = ModelContext { members: Some(&members), ..Default::default() };
        let sd = fit_measure(MeasureKind::EnsembleSd, &d, ctx, MeasureConfig::default()).unwrap();
        assert!(sd.score(&d.features, &d.row_ids).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn correll_zero_on_training_points() {
        let d = train(20, 2);
        let e = Ensemble::fit(ModelKind::Ridge, &Params::new(), &d.features, &d.target, 6, 3).unwrap();
        let members = Members::Bagged(e);
        let ctx = ModelContext { members: Some(&members), ..Default::default() };
        let m = fit_measure(MeasureKind::Correll, &d, ctx, MeasureConfig::default()).unwrap();
        let v = m.score(&d.features, &d.row_ids).unwrap();
        assert!(v.iter().all(|&s| s.abs() < 1e-12 && s >= -1e-12));
    }

    #[test]
    fn score_all_alignment() {
        let d = train(12, 2);
        let test = d.select_rows(&[3, 5, 7]);
        let m = fit_measure(MeasureKind::Gamma, &d, ModelContext::default(), MeasureConfig::default()).unwrap();
        let eval = EvalReport::from_predictions(&test.target, &DVector::zeros(3)).unwrap();
        let s = score_all(&m, &test, &eval).unwrap();
        assert_eq!(s.point_ids, vec![3, 5, 7]);
        assert_eq!(s.len(), 3);
        let empty = d.select_rows(&[]);
        let eval0 = EvalReport { predictions: DVector::zeros(0), abs_errors: DVector::zeros(0), rmse: 0.0, mae: 0.0, r2: 0.0 };
        assert!(matches!(score_all(&m, &empty, &eval0), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn dump_round_trip() {
        let d = train(20, 2);
        let g = GprModel::fit(&d.features, &d.target, 1.0, 0.1).unwrap();
        let ctx = ModelContext { gpr: Some(&g), ..Default::default() };
        for kind in [MeasureKind::Kappa, MeasureKind::Leverage, MeasureKind::GprVar] {
            let m = fit_measure(kind, &d, ctx, MeasureConfig::default()).unwrap();
            let back = AdMeasure::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back.score(&d.features, &d.row_ids).unwrap(), m.score(&d.features, &d.row_ids).unwrap());
        }
    }
}
