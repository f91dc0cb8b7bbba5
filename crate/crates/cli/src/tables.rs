//! Aggregation of validated cells into ranking tables, shared by `bench`
//! and the `tables` re-aggregation command.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use adbench::measures::{read_scores_csv, AdScores, MeasureKind};
use adbench::models::ModelKind;
use adbench::validation::{
    aggregate, auc, coverage_at, default_window, percentile, scale_auc, AucResult, BenchmarkTable, CellOutcome,
    CellResult, CoverageResult,
};
use anyhow::{Context, Result};
use walkdir::WalkDir;

use crate::config::RunConfig;
use crate::manifest::{CellStatus, RunManifest};

pub const TABLE_DIR: &str = "tables";

/// Mean absolute error of the cell's model, in stored row order.
pub fn mean_abs_error(s: &AdScores) -> f64 {
    s.abs_errors.iter().sum::<f64>() / s.len() as f64
}

/// Coverage against the cell's percentile threshold and the unscaled AUC.
pub fn validate_cell(s: &AdScores, pct: f64, window: usize) -> adbench::Result<(CoverageResult, AucResult)> {
    let threshold = percentile(&s.abs_errors, pct)?;
    Ok((coverage_at(s, threshold, pct)?, auc(s, window, mean_abs_error(s))?))
}

/// The measure through which a model kind reports its own uncertainty.
pub fn own_measure(kind: ModelKind) -> Option<MeasureKind> {
    match kind {
        ModelKind::Bnn => Some(MeasureKind::BnnSd),
        ModelKind::Gpr => Some(MeasureKind::GprVar),
        ModelKind::RandomForest => Some(MeasureKind::RfSd),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualRoleRow {
    pub dataset: String,
    pub model: String,
    pub measure: String,
    /// Coverage of the measure on the model's own errors.
    pub own: Option<f64>,
    /// Mean coverage of the same measure over the other models.
    pub external: Option<f64>,
    pub n_external: usize,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Own-versus-external coverage per dataset for each dual-role model, plus
/// an `avg` row over datasets.
pub fn dual_role(cfg: &RunConfig, results: &[CellResult]) -> Vec<DualRoleRow> {
    let coverage = |c: &CellResult| match c.outcome {
        CellOutcome::Ok { coverage_pct, .. } => Some(coverage_pct),
        _ => None,
    };
    let mut datasets: Vec<&str> = Vec::new();
    for c in results {
        if !datasets.contains(&c.dataset.as_str()) {
            datasets.push(&c.dataset);
        }
    }
    let mut rows = Vec::new();
    for m in cfg.models.iter().filter(|m| cfg.dual_role_models.contains(&m.kind)) {
        let Some(measure) = own_measure(m.kind) else { continue };
        let label = m.label();
        let mut per = Vec::new();
        for d in &datasets {
            let same = |c: &&CellResult| c.dataset == *d && c.measure == measure.as_str();
            let own = results.iter().filter(same).find(|c| c.model == label).and_then(coverage);
            let ext: Vec<f64> = results.iter().filter(same).filter(|c| c.model != label).filter_map(coverage).collect();
            per.push(DualRoleRow {
                dataset: d.to_string(),
                model: label.clone(),
                measure: measure.as_str().into(),
                own,
                external: mean(&ext),
                n_external: ext.len(),
            });
        }
        let own: Vec<f64> = per.iter().filter_map(|r| r.own).collect();
        let ext: Vec<f64> = per.iter().filter_map(|r| r.external).collect();
        let avg = DualRoleRow {
            dataset: "avg".into(),
            model: label.clone(),
            measure: measure.as_str().into(),
            own: mean(&own),
            external: mean(&ext),
            n_external: ext.len(),
        };
        rows.extend(per);
        rows.push(avg);
    }
    rows
}

pub fn dual_role_csv(rows: &[DualRoleRow]) -> String {
    let fmt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let mut s = String::from("dataset,model,measure,own_coverage,external_coverage,external_cells\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.dataset, r.model, r.measure, fmt(r.own), fmt(r.external), r.n_external);
    }
    s
}

pub struct Tables {
    pub coverage: BenchmarkTable,
    pub auc: BenchmarkTable,
    pub dual_role: Vec<DualRoleRow>,
}

/// Ranking tables over the regular models; cells of dual-role models only
/// enter the dual-role comparison.
pub fn build_tables(cfg: &RunConfig, results: &[CellResult]) -> Tables {
    let dual: Vec<String> =
        cfg.models.iter().filter(|m| cfg.dual_role_models.contains(&m.kind)).map(|m| m.label()).collect();
    let regular: Vec<CellResult> = results.iter().filter(|c| !dual.contains(&c.model)).cloned().collect();
    let (coverage, auc) = aggregate(&regular);
    Tables { coverage, auc, dual_role: dual_role(cfg, results) }
}

/// Write every table under `out/tables`; returns paths relative to `out`.
pub fn write_tables(out: &Path, tables: &Tables, results: &[CellResult]) -> Result<Vec<PathBuf>> {
    let dir = out.join(TABLE_DIR);
    fs::create_dir_all(&dir)?;
    let mut cells = String::from("dataset,model,measure,status,coverage_pct,scaled_auc\n");
    for c in results {
        match &c.outcome {
            CellOutcome::Ok { coverage_pct, scaled_auc } => {
                let _ = writeln!(cells, "{},{},{},ok,{coverage_pct},{scaled_auc}", c.dataset, c.model, c.measure);
            }
            CellOutcome::Failed { .. } => {
                let _ = writeln!(cells, "{},{},{},failed,,", c.dataset, c.model, c.measure);
            }
        }
    }
    let files = [
        ("coverage_table.csv", tables.coverage.to_csv()),
        ("coverage_table.txt", tables.coverage.to_text()),
        ("auc_table.csv", tables.auc.to_csv()),
        ("auc_table.txt", tables.auc.to_text()),
        ("dual_role_table.csv", dual_role_csv(&tables.dual_role)),
        ("cells.csv", cells),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        fs::write(dir.join(name), body)?;
        written.push(PathBuf::from(TABLE_DIR).join(name));
    }
    Ok(written)
}

/// Recompute every table of an existing output directory from its
/// `scores.csv` files, the config copy and the manifest.
pub fn rebuild(out: &Path, percentile_override: Option<f64>, window_override: Option<usize>) -> Result<(Tables, Vec<CellResult>)> {
    let cfg_text = fs::read_to_string(out.join("config.toml")).context("reading config copy")?;
    let mut cfg = RunConfig::from_toml(&cfg_text)?;
    if let Some(p) = percentile_override {
        cfg.percentile = p;
    }
    if window_override.is_some() {
        cfg.window = window_override;
    }
    cfg.validate()?;

    let mut scores: BTreeMap<(String, String, String), AdScores> = BTreeMap::new();
    for entry in WalkDir::new(out).sort_by_file_name() {
        let entry = entry?;
        if entry.file_name() == "scores.csv" {
            let file = fs::File::open(entry.path())?;
            for s in read_scores_csv(file).with_context(|| format!("reading {}", entry.path().display()))? {
                scores.insert((s.dataset_name.clone(), s.model_kind.clone(), s.measure_kind.clone()), s);
            }
        }
    }
    let manifest = match fs::read_to_string(out.join("run_manifest.txt")) {
        Ok(t) => RunManifest::parse(&t)?,
        Err(_) => RunManifest::default(),
    };
    let order: Vec<(String, String, String, Option<String>)> = if manifest.cells.is_empty() {
        scores.keys().map(|(d, m, k)| (d.clone(), m.clone(), k.clone(), None)).collect()
    } else {
        manifest
            .cells
            .iter()
            .map(|c| {
                let reason = match &c.status {
                    CellStatus::Ok => None,
                    CellStatus::Failed(r) => Some(r.clone()),
                };
                (c.dataset.clone(), c.model.clone(), c.measure.clone(), reason)
            })
            .collect()
    };

    // validate, then scale within each (dataset, model)
    let mut validated: Vec<(usize, Option<(CoverageResult, AucResult)>, Option<String>)> = Vec::new();
    for (i, (d, m, k, reason)) in order.iter().enumerate() {
        if let Some(r) = reason {
            validated.push((i, None, Some(r.clone())));
            continue;
        }
        let key = (d.clone(), m.clone(), k.clone());
        let s = scores.get(&key).with_context(|| format!("no scores.csv for {d}/{m}/{k}"))?;
        let window = cfg.window.unwrap_or_else(|| default_window(s.len()));
        match validate_cell(s, cfg.percentile, window) {
            Ok(v) => validated.push((i, Some(v), None)),
            Err(e) => validated.push((i, None, Some(format!("{}: {e}", e.kind_name())))),
        }
    }
    let mut groups: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for (j, (i, v, _)) in validated.iter().enumerate() {
        if v.is_some() {
            groups.entry((order[*i].0.clone(), order[*i].1.clone())).or_default().push(j);
        }
    }
    for idx in groups.values() {
        let mut a: Vec<AucResult> = idx.iter().map(|&j| validated[j].1.as_ref().expect("ok").1.clone()).collect();
        scale_auc(&mut a);
        for (&j, r) in idx.iter().zip(a) {
            validated[j].1.as_mut().expect("ok").1 = r;
        }
    }
    let results: Vec<CellResult> = validated
        .into_iter()
        .map(|(i, v, reason)| {
            let (d, m, k, _) = &order[i];
            let outcome = match (v, reason) {
                (Some((c, a)), _) => CellOutcome::Ok { coverage_pct: c.coverage_pct, scaled_auc: a.scaled_auc },
                (None, r) => CellOutcome::Failed { reason: r.unwrap_or_default() },
            };
            CellResult { dataset: d.clone(), model: m.clone(), measure: k.clone(), outcome }
        })
        .collect();
    Ok((build_tables(&cfg, &results), results))
}
