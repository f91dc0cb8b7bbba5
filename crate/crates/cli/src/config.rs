//! Run configuration read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use adbench::dataset::synth::SynthKind;
use adbench::dataset::PreprocessSpec;
use adbench::measures::MeasureKind;
use adbench::models::{ModelKind, Params};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_percentile")]
    pub percentile: f64,
    /// Odd smoothing window; per-dataset default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    pub output_dir: PathBuf,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Members of the bagged ensemble behind `ensemble_sd` and `correll`.
    #[serde(default = "default_members")]
    pub ensemble_members: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub intercept: bool,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    /// Models whose own uncertainty is also an AD measure; the dual-role
    /// table compares that measure on the model itself against the same
    /// measure used on the other models.
    #[serde(default = "default_dual")]
    pub dual_role_models: Vec<ModelKind>,
    #[serde(default)]
    pub preprocess: PreprocessSpec,
    pub datasets: Vec<DatasetSpec>,
    pub models: Vec<ModelSpec>,
    pub measures: Vec<MeasureSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    /// Defaults to the file stem or `synth_<kind>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Seeded row subsample taken before splitting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
    /// Generated data with its own train/test intervals instead of a file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n: usize,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub extrapolate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Label used in paths and tables; defaults to the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Params::is_empty")]
    pub params: Params,
    /// Measures not requested for this model.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skip_measures: Vec<MeasureKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub kind: MeasureKind,
    /// For `gpr_var`, `rf_sd` and `bnn_sd`: fit a dedicated GPR / forest /
    /// BNN on the training split instead of requiring the cell's model to
    /// be of that kind.
    #[serde(default)]
    pub auxiliary: bool,
}

fn default_percentile() -> f64 {
    adbench::validation::DEFAULT_PERCENTILE
}
fn default_train_fraction() -> f64 {
    adbench::dataset::DEFAULT_TRAIN_FRACTION
}
fn default_members() -> usize {
    10
}
fn default_k() -> usize {
    5
}
fn default_mc() -> usize {
    1000
}
fn default_dual() -> Vec<ModelKind> {
    vec![ModelKind::Bnn]
}

impl ModelSpec {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.as_str().to_string())
    }
}

impl DatasetSpec {
    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match (&self.synth, &self.path) {
            (Some(s), _) => format!("synth_{}", synth_name(s.kind)),
            (None, Some(p)) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            _ => String::new(),
        }
    }
}

pub fn synth_name(kind: SynthKind) -> &'static str {
    match kind {
        SynthKind::Sine => "sine",
        SynthKind::Linear => "linear",
        SynthKind::Step => "step",
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).context("parsing run config")?;
        c.validate()?;
        Ok(c)
    }

    /// Read a config file; relative dataset paths and `output_dir` are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut c = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut c.datasets {
            if let Some(p) = &d.path {
                if p.is_relative() {
                    d.path = Some(base.join(p));
                }
            }
        }
        if c.output_dir.is_relative() {
            c.output_dir = base.join(&c.output_dir);
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.percentile > 0.0 && self.percentile < 100.0) {
            bail!("percentile must lie in (0, 100), got {}", self.percentile);
        }
        if let Some(w) = self.window {
            if w % 2 == 0 {
                bail!("window must be odd, got {w}");
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            bail!("train_fraction must lie in (0, 1)");
        }
        if self.k == 0 || self.ensemble_members == 0 || self.mc_samples < 2 {
            bail!("k and ensemble_members must be positive and mc_samples at least 2");
        }
        if self.datasets.is_empty() || self.models.is_empty() || self.measures.is_empty() {
            bail!("config needs at least one dataset, model and measure");
        }
        let mut labels = Vec::new();
        for d in &self.datasets {
            match (&d.synth, &d.path, &d.target) {
                (Some(_), None, _) => {}
                (None, Some(_), Some(_)) => {}
                _ => bail!("dataset `{}` needs either `synth` or both `path` and `target`", d.label()),
            }
            labels.push(d.label());
        }
        unique(&labels, "dataset")?;
        unique(&self.models.iter().map(|m| m.label()).collect::<Vec<_>>(), "model")?;
        unique(&self.measures.iter().map(|m| m.kind.as_str().to_string()).collect::<Vec<_>>(), "measure")?;
        for m in &self.models {
            adbench::models::Regressor::new(m.kind, m.params.clone(), self.seed)
                .with_context(|| format!("model `{}`", m.label()))?;
        }
        Ok(())
    }
}

fn unique(labels: &[String], what: &str) -> Result<()> {
    for (i, l) in labels.iter().enumerate() {
        if l.is_empty() || l.contains(['/', '\\']) {
            bail!("invalid {what} name `{l}`");
        }
        if labels[..i].contains(l) {
            bail!("duplicate {what} `{l}`");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 3
output_dir = "out"

[preprocess]
impute = "median"

[[datasets]]
synth = { kind = "sine", n = 40, noise = 0.1, extrapolate = true }

[[datasets]]
path = "data/boston.csv"
target = "MEDV"
subsample = 300

[[models]]
kind = "ridge"
params = { lambda = 0.5 }

[[models]]
kind = "bnn"
skip_measures = ["ensemble_sd"]

[[measures]]
kind = "kappa"

[[measures]]
kind = "gpr_var"
auxiliary = true
"#;

    #[test]
    fn parse_defaults_and_round_trip() {
        let c = RunConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.percentile, 25.0);
        assert_eq!(c.k, 5);
        assert_eq!(c.dual_role_models, vec![ModelKind::Bnn]);
        assert_eq!(c.datasets[0].label(), "synth_sine");
        assert_eq!(c.datasets[1].label(), "boston");
        assert_eq!(c.models[0].params["lambda"], 0.5);
        assert!(c.measures[1].auxiliary);
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml(&SAMPLE.replace("seed = 3", "seed = 3\nsede = 4")).is_err());
        assert!(RunConfig::from_toml(&SAMPLE.replace("auxiliary = true", "auxilary = true")).is_err());
        assert!(RunConfig::from_toml(&SAMPLE.replace("impute = \"median\"", "imputee = \"median\"")).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml(&SAMPLE.replace("seed = 3", "seed = 3\nwindow = 4")).is_err());
        assert!(RunConfig::from_toml(&SAMPLE.replace("lambda = 0.5", "lamda = 0.5")).is_err());
        assert!(RunConfig::from_toml(&SAMPLE.replace("kind = \"kappa\"", "kind = \"kapa\"")).is_err());
        assert!(RunConfig::from_toml(&SAMPLE.replace("target = \"MEDV\"\n", "")).is_err());
    }
}
