//! The `bench` pipeline: per dataset, fit every model, score every
//! requested measure, run coverage and AUC, then aggregate.
//!
//! Work runs in phases so that values shared between cells are computed
//! once: novelty measures depend only on the split, and a confidence
//! measure depends only on the model that supplies it.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use adbench::dataset::synth::generate;
use adbench::dataset::{load_csv, split, subsample, Dataset, Preprocessor};
use adbench::measures::{fit_measure, AdMeasure, AdScores, MeasureConfig, MeasureKind, Members, ModelContext};
use adbench::models::{Ensemble, EvalReport, ModelKind, Params, Regressor};
use adbench::validation::{default_window, scale_auc, AucResult, CoverageResult};
use anyhow::{Context, Result};
use log::info;
use nalgebra::DVector;
use rayon::prelude::*;

use crate::config::{DatasetSpec, RunConfig};
use crate::manifest::{CellRecord, CellStatus};
use crate::tables::validate_cell;

/// Offset added to the run seed for bagged ensembles.
pub const ENSEMBLE_SEED_OFFSET: u64 = 1000;

/// A dataset after loading, splitting and preprocessing.
pub struct Prepared {
    pub name: String,
    pub train: Dataset,
    pub test: Dataset,
    /// Test rows before preprocessing, for re-scoring with `score`.
    pub test_raw: Dataset,
    /// Test targets in original units, aligned with `test` rows.
    pub y_test: DVector<f64>,
    pub preprocessor: Preprocessor,
}

pub fn prepare(spec: &DatasetSpec, cfg: &RunConfig) -> Result<Prepared> {
    let name = spec.label();
    let (train_raw, mut test_raw) = if let Some(s) = &spec.synth {
        let g = generate(s.kind, s.n, s.noise, s.extrapolate, cfg.seed);
        (g.train, g.test)
    } else {
        let path = spec.path.as_ref().expect("validated");
        let target = spec.target.as_deref().expect("validated");
        let mut d = load_csv(path, target).with_context(|| format!("loading {}", path.display()))?;
        if let Some(n) = spec.subsample {
            if n < d.n_rows() {
                d = subsample(&d, n, cfg.seed);
            }
        }
        let s = split(&d, cfg.seed, cfg.train_fraction).with_context(|| format!("splitting {name}"))?;
        (s.train, s.test)
    };
    let preprocessor = Preprocessor::fit(&cfg.preprocess, &train_raw)?;
    let mut train = preprocessor.transform(&train_raw)?;
    let mut test = preprocessor.transform(&test_raw)?;
    train.name = name.clone();
    test.name = name.clone();
    test_raw.name = name.clone();
    let pos: BTreeMap<usize, usize> = test_raw.row_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let y_test = DVector::from_iterator(test.n_rows(), test.row_ids.iter().map(|id| test_raw.target[pos[id]]));
    Ok(Prepared { name, train, test, test_raw, y_test, preprocessor })
}

pub struct FittedModel {
    pub label: String,
    pub kind: ModelKind,
    pub regressor: Regressor,
    pub eval: EvalReport,
    pub seconds: f64,
}

/// Where a measure gets its fitted state from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Source {
    /// Training inputs only.
    Split,
    /// A model of the run, by index.
    Model(usize),
    /// A default-parameter model fitted only for this measure.
    Dedicated(ModelKind),
    /// Bagged ensemble of the model with this index.
    Bagged(usize),
}

pub struct CellOutput {
    pub record: CellRecord,
    pub source: Option<Source>,
    pub scores: Option<AdScores>,
    pub coverage: Option<CoverageResult>,
    pub auc: Option<AucResult>,
}

pub struct DatasetRun {
    pub prepared: Prepared,
    pub models: Vec<std::result::Result<FittedModel, String>>,
    pub measures: BTreeMap<(MeasureKind, Source), (AdMeasure, DVector<f64>)>,
    pub cells: Vec<CellOutput>,
    pub window: usize,
}

fn guarded<T>(f: impl FnOnce() -> adbench::Result<T>) -> std::result::Result<T, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(format!("{}: {e}", e.kind_name())),
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown".into());
            Err(format!("panic: {msg}"))
        }
    }
}

fn model_kind_for(measure: MeasureKind) -> Option<ModelKind> {
    match measure {
        MeasureKind::GprVar => Some(ModelKind::Gpr),
        MeasureKind::RfSd => Some(ModelKind::RandomForest),
        MeasureKind::BnnSd => Some(ModelKind::Bnn),
        _ => None,
    }
}

/// Resolve the state source of one cell, or the reason it cannot run.
fn source_for(
    cfg: &RunConfig,
    models: &[std::result::Result<FittedModel, String>],
    model_idx: usize,
    measure: MeasureKind,
    auxiliary: bool,
) -> std::result::Result<Source, String> {
    if measure.is_novelty() {
        return Ok(Source::Split);
    }
    if matches!(measure, MeasureKind::EnsembleSd | MeasureKind::Correll) {
        return Ok(Source::Bagged(model_idx));
    }
    let needs = model_kind_for(measure).expect("confidence measure");
    if cfg.models[model_idx].kind == needs {
        return Ok(Source::Model(model_idx));
    }
    if !auxiliary {
        let e = adbench::Error::MissingModelContext { measure: measure.as_str().into(), needs: needs.as_str().into() };
        return Err(format!("{}: {e}", e.kind_name()));
    }
    // reuse the run's first successfully fitted model of that kind
    let reuse = cfg
        .models
        .iter()
        .enumerate()
        .position(|(i, m)| m.kind == needs && m.params.is_empty() && models[i].is_ok());
    Ok(reuse.map_or(Source::Dedicated(needs), Source::Model))
}

fn fit_model(kind: ModelKind, params: Params, seed: u64, p: &Prepared) -> adbench::Result<(Regressor, EvalReport)> {
    let mut r = Regressor::new(kind, params, seed)?;
    r.fit(&p.train)?;
    let z = r.predict_rows(&p.test.features, &p.test.row_ids)?;
    let pred = z.map(|v| p.preprocessor.inverse_target(v));
    let eval = EvalReport::from_predictions(&p.y_test, &pred)?;
    Ok((r, eval))
}

fn measure_config(cfg: &RunConfig) -> MeasureConfig {
    MeasureConfig { k: cfg.k, intercept: cfg.intercept, mc_samples: cfg.mc_samples, seed: cfg.seed }
}

/// Run one dataset end to end without writing anything.
pub fn run_dataset(cfg: &RunConfig, prepared: Prepared) -> DatasetRun {
    let p = &prepared;
    info!("{}: {} train / {} test rows, {} features", p.name, p.train.n_rows(), p.test.n_rows(), p.train.n_features());

    let models: Vec<std::result::Result<FittedModel, String>> = cfg
        .models
        .par_iter()
        .map(|m| {
            let t = Instant::now();
            let (regressor, eval) = guarded(|| fit_model(m.kind, m.params.clone(), cfg.seed, p))?;
            info!("{}/{}: test MAE {:.4}", p.name, m.label(), eval.mae);
            Ok(FittedModel { label: m.label(), kind: m.kind, regressor, eval, seconds: t.elapsed().as_secs_f64() })
        })
        .collect();

    // requested cells and their sources
    let mut plan: Vec<(usize, MeasureKind, std::result::Result<Source, String>)> = Vec::new();
    for (i, m) in cfg.models.iter().enumerate() {
        for ms in &cfg.measures {
            if m.skip_measures.contains(&ms.kind) {
                continue;
            }
            let src = match &models[i] {
                Err(e) => Err(format!("model fit failed: {e}")),
                Ok(_) => source_for(cfg, &models, i, ms.kind, ms.auxiliary),
            };
            plan.push((i, ms.kind, src));
        }
    }

    // helper models: dedicated fits and bagged ensembles
    let mut helpers: Vec<Source> = plan
        .iter()
        .filter_map(|(_, _, s)| match s {
            Ok(s @ (Source::Dedicated(_) | Source::Bagged(_))) => Some(*s),
            _ => None,
        })
        .collect();
    helpers.sort();
    helpers.dedup();
    enum Helper {
        Model(Regressor),
        Members(Members),
    }
    let helper_fits: BTreeMap<Source, std::result::Result<Helper, String>> = helpers
        .par_iter()
        .map(|&s| {
            let r = match s {
                Source::Dedicated(kind) => guarded(|| {
                    let mut r = Regressor::new(kind, Params::new(), cfg.seed)?;
                    r.fit(&p.train)?;
                    Ok(Helper::Model(r))
                }),
                Source::Bagged(i) => {
                    let m = models[i].as_ref().expect("planned only for fitted models");
                    guarded(|| {
                        let e = Ensemble::fit(
                            m.kind,
                            &m.regressor.resolved_params(),
                            &p.train.features,
                            &p.train.target,
                            cfg.ensemble_members,
                            cfg.seed + ENSEMBLE_SEED_OFFSET,
                        )?;
                        Ok(Helper::Members(Members::Bagged(e)))
                    })
                }
                _ => unreachable!(),
            };
            (s, r)
        })
        .collect();

    // unique measure states
    let mut keys: Vec<(MeasureKind, Source)> =
        plan.iter().filter_map(|(_, k, s)| s.as_ref().ok().map(|s| (*k, *s))).collect();
    keys.sort();
    keys.dedup();
    let mcfg = measure_config(cfg);
    let scored: BTreeMap<(MeasureKind, Source), (std::result::Result<(AdMeasure, DVector<f64>), String>, f64)> = keys
        .par_iter()
        .map(|&(kind, src)| {
            let t = Instant::now();
            let regressor = |s: Source| -> std::result::Result<&Regressor, String> {
                match s {
                    Source::Model(i) => Ok(&models[i].as_ref().expect("fitted").regressor),
                    Source::Dedicated(_) => match &helper_fits[&s] {
                        Ok(Helper::Model(r)) => Ok(r),
                        Ok(_) => unreachable!(),
                        Err(e) => Err(format!("dedicated model failed: {e}")),
                    },
                    _ => unreachable!(),
                }
            };
            let res = (|| {
                let mut ctx = ModelContext::default();
                match src {
                    Source::Split => {}
                    Source::Bagged(_) => match &helper_fits[&src] {
                        Ok(Helper::Members(m)) => ctx.members = Some(m),
                        Ok(_) => unreachable!(),
                        Err(e) => return Err(format!("ensemble failed: {e}")),
                    },
                    s => {
                        let r = regressor(s)?;
                        ctx.forest = r.as_forest();
                        ctx.gpr = r.as_gpr();
                        ctx.bnn = r.as_bnn();
                    }
                }
                guarded(|| {
                    let m = fit_measure(kind, &p.train, ctx, mcfg)?;
                    let v = m.score(&p.test.features, &p.test.row_ids)?;
                    Ok((m, v))
                })
            })();
            ((kind, src), (res, t.elapsed().as_secs_f64()))
        })
        .collect();

    // validation per cell; one threshold per (dataset, model)
    let window = cfg.window.unwrap_or_else(|| default_window(p.test.n_rows()));
    let mut cells = Vec::with_capacity(plan.len());
    let mut measures = BTreeMap::new();
    for (i, kind, src) in plan {
        let model_label = cfg.models[i].label();
        let mut record = CellRecord {
            dataset: p.name.clone(),
            model: model_label.clone(),
            measure: kind.as_str().to_string(),
            status: CellStatus::Ok,
            seconds: 0.0,
            artifact_dir: None,
        };
        let source = src.as_ref().ok().copied();
        let outcome = src.and_then(|s| {
            let (res, secs) = &scored[&(kind, s)];
            record.seconds = *secs;
            let (_, values) = res.as_ref().map_err(|e| e.clone())?;
            let fm = models[i].as_ref().expect("fitted");
            guarded(|| {
                let scores = AdScores::new(
                    kind.as_str(),
                    p.test.row_ids.clone(),
                    values.iter().copied().collect(),
                    fm.eval.abs_errors.iter().copied().collect(),
                )?
                .with_labels(model_label.clone(), p.name.clone());
                let (c, a) = validate_cell(&scores, cfg.percentile, window)?;
                Ok((scores, c, a))
            })
        });
        match outcome {
            Ok((s, c, a)) => cells.push(CellOutput { record, source, scores: Some(s), coverage: Some(c), auc: Some(a) }),
            Err(e) => {
                record.status = CellStatus::Failed(e);
                cells.push(CellOutput { record, source, scores: None, coverage: None, auc: None });
            }
        }
    }
    for (key, (res, _)) in scored {
        if let Ok(v) = res {
            measures.insert(key, v);
        }
    }

    // min-max scale AUC within each model's cell group
    for label in cfg.models.iter().map(|m| m.label()) {
        let idx: Vec<usize> = (0..cells.len()).filter(|&j| cells[j].record.model == label && cells[j].auc.is_some()).collect();
        let mut group: Vec<AucResult> = idx.iter().map(|&j| cells[j].auc.clone().expect("ok cell")).collect();
        scale_auc(&mut group);
        for (j, a) in idx.into_iter().zip(group) {
            cells[j].auc = Some(a);
        }
    }

    DatasetRun { prepared, models, measures, cells, window }
}

/// Paths of the dump for a measure state, relative to the dataset folder.
pub fn measure_dump_path(cfg: &RunConfig, kind: MeasureKind, src: Source) -> PathBuf {
    match src {
        Source::Split | Source::Dedicated(_) => PathBuf::from("measures").join(format!("{kind}.json")),
        Source::Model(i) | Source::Bagged(i) => PathBuf::from(cfg.models[i].label()).join("measures").join(format!("{kind}.json")),
    }
}
