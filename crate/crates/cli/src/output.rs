//! Artifact layout of a bench run and the run driver. All files are written
//! from the calling thread after the dataset computations finish.
//!
//! ```text
//! output_dir/
//!   config.toml  run_manifest.txt  tables/
//!   {dataset}/preprocessor.json  test_rows.csv  measures/{measure}.json
//!   {dataset}/{model}/model.json  predictions.csv  measures/{measure}.json
//!   {dataset}/{model}/{measure}/scores.csv  coverage.csv  auc.csv  coverage.svg  auc.svg
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use adbench::dataset::write_csv;
use adbench::measures::write_scores_csv;
use adbench::validation::{auc_csv, coverage_csv, curve_svg, sorted_errors, CellOutcome, CellResult};
use anyhow::{Context, Result};
use log::{info, warn};
use rayon::prelude::*;

use crate::bench::{measure_dump_path, prepare, run_dataset, DatasetRun, Prepared};
use crate::config::RunConfig;
use crate::manifest::{CellRecord, RunManifest};
use crate::tables::{build_tables, write_tables};

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn predictions_csv(run: &DatasetRun, model: usize) -> Option<String> {
    let m = run.models[model].as_ref().ok()?;
    let p = &run.prepared;
    let mut s = String::from("point_id,y_true,prediction,abs_error\n");
    for (i, id) in p.test.row_ids.iter().enumerate() {
        let _ = writeln!(s, "{id},{},{},{}", p.y_test[i], m.eval.predictions[i], m.eval.abs_errors[i]);
    }
    Some(s)
}

/// Write one dataset's artifacts; returns its manifest records.
fn write_dataset(out: &Path, cfg: &RunConfig, run: &DatasetRun) -> Result<Vec<CellRecord>> {
    let p = &run.prepared;
    let root = out.join(&p.name);
    write(&root.join("preprocessor.json"), serde_json::to_string(&p.preprocessor)?)?;
    let mut buf = Vec::new();
    write_csv(&p.test_raw, &mut buf, true)?;
    write(&root.join("test_rows.csv"), buf)?;

    for (i, m) in run.models.iter().enumerate() {
        match m {
            Ok(m) => {
                let dir = root.join(&m.label);
                write(&dir.join("model.json"), m.regressor.to_json()?)?;
                write(&dir.join("predictions.csv"), predictions_csv(run, i).expect("fitted"))?;
            }
            Err(e) => warn!("{}/{}: {e}", p.name, cfg.models[i].label()),
        }
    }
    for ((kind, src), (measure, _)) in &run.measures {
        write(&root.join(measure_dump_path(cfg, *kind, *src)), measure.to_json()?)?;
    }

    let mut records = Vec::with_capacity(run.cells.len());
    for cell in &run.cells {
        let mut record = cell.record.clone();
        if let (Some(s), Some(c), Some(a)) = (&cell.scores, &cell.coverage, &cell.auc) {
            let rel = PathBuf::from(&p.name).join(&record.model).join(&record.measure);
            let dir = out.join(&rel);
            let mut buf = Vec::new();
            write_scores_csv([s], &mut buf)?;
            write(&dir.join("scores.csv"), buf)?;
            write(&dir.join("coverage.csv"), coverage_csv(c))?;
            let errors = sorted_errors(s);
            write(&dir.join("auc.csv"), auc_csv(a, &errors))?;
            let title = format!("{} / {} / {}", p.name, record.model, record.measure);
            write(
                &dir.join("coverage.svg"),
                curve_svg(&title, "cumulative mean |error|", &c.cumulative_curve, c.threshold, "threshold"),
            )?;
            let n = a.smoothed_curve.len() as f64;
            let pts: Vec<(f64, f64)> =
                a.smoothed_curve.iter().enumerate().map(|(i, v)| (100.0 * (i + 1) as f64 / n, *v)).collect();
            write(&dir.join("auc.svg"), curve_svg(&title, "smoothed |error|", &pts, a.e_avg, "mean |error|"))?;
            record.artifact_dir = Some(rel);
        }
        records.push(record);
    }
    Ok(records)
}

pub fn cell_result(cell: &crate::bench::CellOutput) -> CellResult {
    let r = &cell.record;
    let outcome = match (&cell.coverage, &cell.auc, &r.status) {
        (Some(c), Some(a), _) => CellOutcome::Ok { coverage_pct: c.coverage_pct, scaled_auc: a.scaled_auc },
        (_, _, crate::manifest::CellStatus::Failed(reason)) => CellOutcome::Failed { reason: reason.clone() },
        _ => CellOutcome::Failed { reason: "incomplete".into() },
    };
    CellResult { dataset: r.dataset.clone(), model: r.model.clone(), measure: r.measure.clone(), outcome }
}

/// Run every dataset of `cfg` on `jobs` threads and write all artifacts.
/// Errors returned here are aborts; failed cells are in the manifest.
pub fn run_bench(cfg: &RunConfig, jobs: usize) -> Result<RunManifest> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    let prepared: Vec<Prepared> = cfg.datasets.iter().map(|d| prepare(d, cfg)).collect::<Result<_>>()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let runs: Vec<DatasetRun> = pool.install(|| prepared.into_par_iter().map(|p| run_dataset(cfg, p)).collect());

    let mut manifest = RunManifest { config_hash: cfg.hash()?, ..Default::default() };
    write(&out.join("config.toml"), cfg.to_toml()?)?;
    manifest.artifacts.push("config.toml".into());
    let mut results = Vec::new();
    for run in &runs {
        manifest.cells.extend(write_dataset(out, cfg, run)?);
        results.extend(run.cells.iter().map(cell_result));
    }
    let tables = build_tables(cfg, &results);
    manifest.artifacts.extend(write_tables(out, &tables, &results)?);
    write(&out.join("run_manifest.txt"), manifest.to_text())?;
    info!("{} cells, {} failed; tables in {}", manifest.cells.len(), manifest.n_failed(), out.join("tables").display());
    Ok(manifest)
}
