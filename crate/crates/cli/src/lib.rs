//! Benchmark runner wiring: `bench`, `score`, `synth` and `tables`.

pub mod bench;
pub mod config;
pub mod manifest;
pub mod output;
pub mod tables;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use adbench::dataset::synth::{generate, SynthKind};
use adbench::dataset::{load_csv_unlabeled, write_csv, Preprocessor};
use adbench::measures::AdMeasure;
use adbench::models::Regressor;
use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crate::config::RunConfig;

pub const SEED_ENV: &str = "AD_BENCH_SEED";

#[derive(Debug, Parser)]
#[command(name = "adbench", version, about = "Applicability-domain measure benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every dataset x model x measure cell of a config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Overrides AD_BENCH_SEED and the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = SEED_ENV, hide = true)]
        env_seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Predict and score new rows with dumped model and measure files.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Preprocessor dump; without it the input is taken as already
        /// preprocessed and predictions stay in model units.
        #[arg(long)]
        preprocessor: Option<PathBuf>,
        /// Target column; rows get `abs_error = NaN` when the input lacks it.
        #[arg(long)]
        target: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = SEED_ENV, hide = true)]
        env_seed: Option<u64>,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a synthetic one-dimensional train/test pair.
    Synth {
        #[arg(long)]
        kind: SynthKind,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        extrapolate: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = SEED_ENV, hide = true)]
        env_seed: Option<u64>,
        /// Writes `<prefix>_train.csv` and `<prefix>_test.csv`.
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Rebuild the tables of a finished run from its scores.csv files.
    Tables {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        percentile: Option<f64>,
        #[arg(long)]
        window: Option<usize>,
    },
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Abort = 1,
    CellsFailed = 2,
}

pub fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Bench { config, seed, env_seed, output_dir, jobs } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed.or(env_seed) {
                cfg.seed = s;
            }
            if let Some(o) = output_dir {
                cfg.output_dir = o;
            }
            let m = output::run_bench(&cfg, jobs)?;
            Ok(if m.n_failed() == 0 { Status::Ok } else { Status::CellsFailed })
        }
        Command::Score { model, measure, input, preprocessor, target, seed, env_seed, output } => {
            let text = score(&model, &measure, &input, preprocessor.as_deref(), &target, seed.or(env_seed))?;
            match output {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
            Ok(Status::Ok)
        }
        Command::Synth { kind, n, noise, extrapolate, seed, env_seed, out_prefix } => {
            synth(kind, n, noise, extrapolate, seed.or(env_seed).unwrap_or(0), &out_prefix)?;
            Ok(Status::Ok)
        }
        Command::Tables { dir, percentile, window } => {
            let (t, results) = tables::rebuild(&dir, percentile, window)?;
            tables::write_tables(&dir, &t, &results)?;
            print!("{}", t.coverage.to_text());
            Ok(Status::Ok)
        }
    }
}

/// AdScores CSV with an extra `prediction` column. Predictions and errors
/// are in original target units when a preprocessor is given.
pub fn score(
    model: &Path,
    measure: &Path,
    input: &Path,
    preprocessor: Option<&Path>,
    target: &str,
    seed: Option<u64>,
) -> Result<String> {
    let read = |p: &Path| fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
    let mut regressor = Regressor::from_json(&read(model)?)?;
    let mut measure = AdMeasure::from_json(&read(measure)?)?;
    if let Some(s) = seed {
        regressor.seed = s;
        measure.config.seed = s;
    }
    let raw = load_csv_unlabeled(input, target)?;
    let data = match preprocessor {
        Some(p) => {
            let pre: Preprocessor = serde_json::from_str(&read(p)?)?;
            let mut d = pre.transform(&raw)?;
            let pred = regressor.predict_rows(&d.features, &d.row_ids)?.map(|v| pre.inverse_target(v));
            let pos: std::collections::BTreeMap<usize, usize> =
                raw.row_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
            d.target = d.row_ids.iter().map(|id| raw.target[pos[id]]).collect::<Vec<_>>().into();
            (d, pred)
        }
        None => {
            let pred = regressor.predict_rows(&raw.features, &raw.row_ids)?;
            (raw, pred)
        }
    };
    let (d, pred) = data;
    let values = measure.score(&d.features, &d.row_ids)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["point_id", "ad_value", "abs_error", "measure_kind", "model_kind", "dataset_name", "prediction"])?;
    for i in 0..d.n_rows() {
        let err = (d.target[i] - pred[i]).abs();
        w.write_record([
            d.row_ids[i].to_string(),
            values[i].to_string(),
            err.to_string(),
            measure.kind.as_str().to_string(),
            regressor.kind.as_str().to_string(),
            d.name.clone(),
            pred[i].to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn synth(kind: SynthKind, n: usize, noise: f64, extrapolate: bool, seed: u64, prefix: &Path) -> Result<()> {
    let g = generate(kind, n, noise, extrapolate, seed);
    for (part, d) in [("train", &g.train), ("test", &g.test)] {
        let mut name = prefix.as_os_str().to_owned();
        name.push(format!("_{part}.csv"));
        let path = PathBuf::from(name);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut buf = Vec::new();
        write_csv(d, &mut buf, true)?;
        fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
