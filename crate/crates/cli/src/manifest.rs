//! `run_manifest.txt`: one tab-separated line per requested cell.
//!
//! ```text
//! config_hash\t<sha256>
//! cell\tstatus\tseconds\tartifacts
//! boston/ridge/kappa\tok\t0.012\tboston/ridge/kappa
//! boston/ridge/gpr_var\tfailed(MissingModelContext: ...)\t0.000\t-
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    Failed(String),
}

impl std::fmt::Display for CellStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CellStatus::Ok => f.write_str("ok"),
            CellStatus::Failed(r) => write!(f, "failed({r})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub dataset: String,
    pub model: String,
    pub measure: String,
    pub status: CellStatus,
    pub seconds: f64,
    /// Relative to the output directory.
    pub artifact_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunManifest {
    pub config_hash: String,
    pub cells: Vec<CellRecord>,
    /// Table and other run-level files, relative to the output directory.
    pub artifacts: Vec<PathBuf>,
}

impl RunManifest {
    pub fn n_failed(&self) -> usize {
        self.cells.iter().filter(|c| c.status != CellStatus::Ok).count()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("config_hash\t{}\ncell\tstatus\tseconds\tartifacts\n", self.config_hash);
        for c in &self.cells {
            // tabs and newlines in failure reasons would break the layout
            let status = c.status.to_string().replace(['\t', '\n'], " ");
            let dir = c.artifact_dir.as_ref().map_or("-".to_string(), |d| d.to_string_lossy().into_owned());
            let _ = writeln!(s, "{}/{}/{}\t{}\t{:.3}\t{}", c.dataset, c.model, c.measure, status, c.seconds, dir);
        }
        for a in &self.artifacts {
            let _ = writeln!(s, "artifact\t{}", a.display());
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = RunManifest::default();
        for (n, line) in text.lines().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            match f.as_slice() {
                ["config_hash", h] => m.config_hash = h.to_string(),
                ["cell", ..] => {}
                ["artifact", p] => m.artifacts.push(PathBuf::from(p)),
                [cell, status, secs, dir] => {
                    let parts: Vec<&str> = cell.split('/').collect();
                    let [dataset, model, measure] = parts.as_slice() else {
                        bail!("manifest line {}: bad cell `{cell}`", n + 1);
                    };
                    let status = if *status == "ok" {
                        CellStatus::Ok
                    } else if let Some(r) = status.strip_prefix("failed(").and_then(|r| r.strip_suffix(')')) {
                        CellStatus::Failed(r.to_string())
                    } else {
                        bail!("manifest line {}: bad status `{status}`", n + 1);
                    };
                    m.cells.push(CellRecord {
                        dataset: dataset.to_string(),
                        model: model.to_string(),
                        measure: measure.to_string(),
                        status,
                        seconds: secs.parse().with_context(|| format!("manifest line {}", n + 1))?,
                        artifact_dir: (*dir != "-").then(|| PathBuf::from(dir)),
                    });
                }
                _ => bail!("manifest line {}: unexpected layout", n + 1),
            }
        }
        Ok(m)
    }
}
