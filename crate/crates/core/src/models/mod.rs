//! Regressor zoo behind one fit/predict contract.
//!
//! Hyperparameters are a flat `name -> real` map so they can be written
//! inline in a config file. Unknown names are rejected. Defaults:
//!
//! | kind            | parameters (default)                                                        |
//! |-----------------|-----------------------------------------------------------------------------|
//! | `linear`        | none                                                                        |
//! | `ridge`         | `lambda` (1.0)                                                              |
//! | `lasso`         | `lambda` (0.01), `max_iter` (1000), `tol` (1e-8)                            |
//! | `decision_tree` | `max_depth` (0 = unbounded), `min_samples_leaf` (1), `max_features` (0 = all) |
//! | `random_forest` | `n_trees` (50), `max_depth` (0), `min_samples_leaf` (1), `max_features` (0 = max(1, p/3)) |
//! | `mlp`           | `hidden` (32), `layers` (1), `epochs` (200), `batch_size` (32), `learning_rate` (0.01) |
//! | `gpr`           | `gamma`, `alpha` (grid-selected when absent), `lml_subsample` (500)         |
//! | `bnn`           | `prior_sigma` (1), `noise_sigma` (0.1), `epochs` (200), `batch_size` (64), `learning_rate` (0.01), `rho_init` (−3), `mc_samples` (1000) |
//!
//! ## Dump format
//!
//! [`Regressor::to_json`] writes a JSON object
//! `{"format_version": 1, "kind": ..., "params": {...}, "seed": ..., "n_features": ..., "fitted": {...}}`.
//! `fitted` is an externally tagged enum holding the per-kind state (nalgebra
//! matrices serialize as `[data, rows, cols]` with column-major `data`). The
//! GPR Cholesky factor is not stored; it is recomputed on load.

pub mod bnn;
pub mod ensemble;
pub mod forest;
pub mod gpr;
pub mod linear;
pub mod mlp;
pub mod nn;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{subsample, Dataset};
use crate::error::{Error, Result};

pub use bnn::{BnnConfig, BnnModel};
pub use ensemble::{Ensemble, MemberPredictions};
pub use forest::RandomForest;
pub use gpr::GprModel;
pub use linear::{LassoFit, LinearModel};
pub use mlp::{Mlp, MlpConfig};
pub use tree::{Tree, TreeParams};

pub const DUMP_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Ridge,
    Lasso,
    DecisionTree,
    RandomForest,
    Mlp,
    Gpr,
    Bnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] = [
        ModelKind::Linear,
        ModelKind::Ridge,
        ModelKind::Lasso,
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::Mlp,
        ModelKind::Gpr,
        ModelKind::Bnn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Ridge => "ridge",
            ModelKind::Lasso => "lasso",
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Mlp => "mlp",
            ModelKind::Gpr => "gpr",
            ModelKind::Bnn => "bnn",
        }
    }

    fn known_params(self) -> &'static [&'static str] {
        match self {
            ModelKind::Linear => &[],
            ModelKind::Ridge => &["lambda"],
            ModelKind::Lasso => &["lambda", "max_iter", "tol"],
            ModelKind::DecisionTree => &["max_depth", "min_samples_leaf", "max_features"],
            ModelKind::RandomForest => &["n_trees", "max_depth", "min_samples_leaf", "max_features"],
            ModelKind::Mlp => &["hidden", "layers", "epochs", "batch_size", "learning_rate"],
            ModelKind::Gpr => &["gamma", "alpha", "lml_subsample"],
            ModelKind::Bnn => &[
                "prior_sigma",
                "noise_sigma",
                "epochs",
                "batch_size",
                "learning_rate",
                "rho_init",
                "mc_samples",
            ],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidHyperparameter(format!("unknown model kind `{s}`")))
    }
}

pub type Params = BTreeMap<String, f64>;

fn real(p: &Params, name: &str, default: f64) -> f64 {
    p.get(name).copied().unwrap_or(default)
}

fn count(p: &Params, name: &str, default: usize) -> Result<usize> {
    match p.get(name) {
        None => Ok(default),
        Some(&v) if v >= 0.0 && v.fract() == 0.0 && v.is_finite() => Ok(v as usize),
        Some(v) => Err(Error::InvalidHyperparameter(format!("{name} = {v} is not a non-negative integer"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fitted {
    Linear(LinearModel),
    Lasso(LassoFit),
    Tree(Tree),
    Forest(RandomForest),
    Mlp(Mlp),
    Gpr(GprModel),
    Bnn(BnnModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regressor {
    pub kind: ModelKind,
    pub params: Params,
    pub seed: u64,
    n_features: Option<usize>,
    fitted: Option<Fitted>,
}

#[derive(Serialize, Deserialize)]
struct ModelDump {
    format_version: u32,
    kind: ModelKind,
    params: Params,
    seed: u64,
    n_features: usize,
    fitted: Fitted,
}

impl Regressor {
    pub fn new(kind: ModelKind, params: Params, seed: u64) -> Result<Self> {
        if let Some(bad) = params.keys().find(|k| !kind.known_params().contains(&k.as_str())) {
            return Err(Error::InvalidHyperparameter(format!("`{bad}` is not a {kind} parameter")));
        }
        if let Some((k, v)) = params.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidHyperparameter(format!("{k} = {v}")));
        }
        Ok(Regressor { kind, params, seed, n_features: None, fitted: None })
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted.is_some()
    }

    pub fn fitted(&self) -> Option<&Fitted> {
        self.fitted.as_ref()
    }

    pub fn as_forest(&self) -> Option<&RandomForest> {
        match &self.fitted {
            Some(Fitted::Forest(f)) => Some(f),
            _ => None,
        }
    }

    pub fn as_gpr(&self) -> Option<&GprModel> {
        match &self.fitted {
            Some(Fitted::Gpr(g)) => Some(g),
            _ => None,
        }
    }

    pub fn as_bnn(&self) -> Option<&BnnModel> {
        match &self.fitted {
            Some(Fitted::Bnn(b)) => Some(b),
            _ => None,
        }
    }

    pub fn fit(&mut self, train: &Dataset) -> Result<()> {
        if !train.is_model_ready() {
            return Err(Error::DegenerateInput("training features must be numeric and finite".into()));
        }
        self.fit_xy(&train.features, &train.target)
    }

    pub fn fit_xy(&mut self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
        if x.nrows() == 0 || x.nrows() != y.len() {
            return Err(Error::DegenerateInput(format!("{} rows, {} targets", x.nrows(), y.len())));
        }
        let p = &self.params;
        let fitted = match self.kind {
            ModelKind::Linear => Fitted::Linear(linear::fit_ridge(x, y, 0.0)?),
            ModelKind::Ridge => Fitted::Linear(linear::fit_ridge(x, y, real(p, "lambda", 1.0))?),
            ModelKind::Lasso => Fitted::Lasso(linear::fit_lasso(
                x,
                y,
                real(p, "lambda", 0.01),
                count(p, "max_iter", 1000)?,
                real(p, "tol", 1e-8),
            )?),
            ModelKind::DecisionTree => Fitted::Tree(Tree::fit(x, y, self.tree_params(x.ncols(), false)?, self.seed)),
            ModelKind::RandomForest => Fitted::Forest(RandomForest::fit(
                x,
                y,
                count(p, "n_trees", 50)?.max(1),
                self.tree_params(x.ncols(), true)?,
                self.seed,
            )),
            ModelKind::Mlp => Fitted::Mlp(Mlp::fit(x, y, &self.mlp_config()?, self.seed)?),
            ModelKind::Gpr => Fitted::Gpr(self.fit_gpr(x, y)?),
            ModelKind::Bnn => Fitted::Bnn(BnnModel::fit(x, y, &self.bnn_config()?, self.seed)?),
        };
        self.n_features = Some(x.ncols());
        self.fitted = Some(fitted);
        Ok(())
    }

    fn tree_params(&self, n_features: usize, forest: bool) -> Result<TreeParams> {
        let p = &self.params;
        let mut max_features = count(p, "max_features", 0)?;
        if forest && max_features == 0 {
            max_features = (n_features / 3).max(1);
        }
        Ok(TreeParams {
            max_depth: count(p, "max_depth", 0)?,
            min_samples_leaf: count(p, "min_samples_leaf", 1)?.max(1),
            max_features,
        })
    }

    fn mlp_config(&self) -> Result<MlpConfig> {
        let p = &self.params;
        let d = MlpConfig::default();
        Ok(MlpConfig {
            hidden: vec![count(p, "hidden", d.hidden[0])?; count(p, "layers", 1)?],
            epochs: count(p, "epochs", d.epochs)?,
            batch_size: count(p, "batch_size", d.batch_size)?,
            learning_rate: real(p, "learning_rate", d.learning_rate),
        })
    }

    pub fn bnn_config(&self) -> Result<BnnConfig> {
        let p = &self.params;
        let d = BnnConfig::default();
        Ok(BnnConfig {
            prior_sigma: real(p, "prior_sigma", d.prior_sigma),
            noise_sigma: real(p, "noise_sigma", d.noise_sigma),
            epochs: count(p, "epochs", d.epochs)?,
            batch_size: count(p, "batch_size", d.batch_size)?,
            learning_rate: real(p, "learning_rate", d.learning_rate),
            rho_init: real(p, "rho_init", d.rho_init),
            mc_samples: count(p, "mc_samples", d.mc_samples)?,
            ..d
        })
    }

    fn fit_gpr(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<GprModel> {
        let p = &self.params;
        match (p.get("gamma"), p.get("alpha")) {
            (Some(&g), Some(&a)) => GprModel::fit(x, y, g, a),
            (g, a) => {
                let gammas = g.map_or_else(gpr::default_gamma_grid, |&g| vec![g]);
                let alphas = a.map_or_else(gpr::default_alpha_grid, |&a| vec![a]);
                let limit = count(p, "lml_subsample", 500)?;
                if limit > 0 && x.nrows() > limit {
                    let sel = subsample(&Dataset::from_matrix("lml", x.clone(), y.clone()), limit, self.seed);
                    GprModel::fit_lml_on(&sel.features, &sel.target, x, y, &gammas, &alphas)
                } else {
                    GprModel::fit_lml(x, y, &gammas, &alphas)
                }
            }
        }
    }

    /// Parameters with any fit-time selections made explicit (the GPR grid
    /// winner), so that copies of this model skip the search.
    pub fn resolved_params(&self) -> Params {
        let mut p = self.params.clone();
        if let Some(Fitted::Gpr(g)) = &self.fitted {
            p.insert("gamma".into(), g.gamma);
            p.insert("alpha".into(), g.alpha);
        }
        p
    }

    fn check_input(&self, x: &DMatrix<f64>) -> Result<&Fitted> {
        let fitted = self.fitted.as_ref().ok_or(Error::NotFitted)?;
        if Some(x.ncols()) != self.n_features {
            return Err(Error::SchemaMismatch(format!(
                "model expects {} features, got {}",
                self.n_features.unwrap_or(0),
                x.ncols()
            )));
        }
        Ok(fitted)
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let ids: Vec<usize> = (0..x.nrows()).collect();
        self.predict_rows(x, &ids)
    }

    /// Predictions for rows identified by `point_ids`. Only the BNN uses the
    /// ids: its Monte Carlo mean for row `i` is seeded by `seed ^ id`.
    pub fn predict_rows(&self, x: &DMatrix<f64>, point_ids: &[usize]) -> Result<DVector<f64>> {
        Ok(match self.check_input(x)? {
            Fitted::Linear(m) => m.predict(x),
            Fitted::Lasso(m) => m.model.predict(x),
            Fitted::Tree(t) => t.predict(x),
            Fitted::Forest(f) => f.predict(x),
            Fitted::Mlp(m) => m.predict(x),
            Fitted::Gpr(g) => g.predict(x),
            Fitted::Bnn(b) => b.mc_predict(x, point_ids, b.config.mc_samples, self.seed)?.0,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let dump = ModelDump {
            format_version: DUMP_FORMAT_VERSION,
            kind: self.kind,
            params: self.params.clone(),
            seed: self.seed,
            n_features: self.n_features.ok_or(Error::NotFitted)?,
            fitted: self.fitted.clone().ok_or(Error::NotFitted)?,
        };
        Ok(serde_json::to_string(&dump)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let found = v.get("format_version").and_then(|f| f.as_u64()).unwrap_or(0) as u32;
        if found != DUMP_FORMAT_VERSION {
            return Err(Error::VersionMismatch { expected: DUMP_FORMAT_VERSION, found });
        }
        let mut dump: ModelDump = serde_json::from_value(v)?;
        if let Fitted::Gpr(g) = &mut dump.fitted {
            g.rebuild()?;
        }
        Ok(Regressor {
            kind: dump.kind,
            params: dump.params,
            seed: dump.seed,
            n_features: Some(dump.n_features),
            fitted: Some(dump.fitted),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub predictions: DVector<f64>,
    pub abs_errors: DVector<f64>,
    pub rmse: f64,
    pub mae: f64,
    /// `NaN` when the test targets are constant.
    pub r2: f64,
}

impl EvalReport {
    pub fn from_predictions(y_true: &DVector<f64>, y_pred: &DVector<f64>) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::LengthMismatch(format!("{} targets, {} predictions", y_true.len(), y_pred.len())));
        }
        if y_true.is_empty() {
            return Err(Error::DegenerateInput("empty test set".into()));
        }
        let n = y_true.len() as f64;
        let diff = y_true - y_pred;
        let abs_errors = diff.abs();
        let ss_res = diff.norm_squared();
        let mean = y_true.mean();
        let ss_tot: f64 = y_true.iter().map(|v| (v - mean).powi(2)).sum();
        let r2 = if ss_tot == 0.0 {
            warn!("constant test targets: R² undefined");
            f64::NAN
        } else {
            1.0 - ss_res / ss_tot
        };
        Ok(EvalReport {
            predictions: y_pred.clone(),
            rmse: (ss_res / n).sqrt(),
            mae: abs_errors.sum() / n,
            abs_errors,
            r2,
        })
    }
}

pub fn evaluate(r: &Regressor, test: &Dataset) -> Result<EvalReport> {
    let pred = r.predict_rows(&test.features, &test.row_ids)?;
    EvalReport::from_predictions(&test.target, &pred)
}
