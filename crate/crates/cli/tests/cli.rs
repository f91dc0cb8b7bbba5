use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use adbench::measures::read_scores_csv;
use adbench_cli::config::RunConfig;
use adbench_cli::manifest::{CellStatus, RunManifest};
use adbench_cli::output::run_bench;
use adbench_cli::tables::rebuild;
use walkdir::WalkDir;

const SMOKE: &str = r#"
seed = 4
output_dir = "out"
ensemble_members = 4

[[datasets]]
synth = { kind = "sine", n = 60, noise = 0.1, extrapolate = true }

[[models]]
kind = "ridge"

[[models]]
kind = "mlp"
params = { epochs = 50 }

[[measures]]
kind = "kappa"

[[measures]]
kind = "leverage"

[[measures]]
kind = "ensemble_sd"
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_adbench"));
    c.env_remove("AD_BENCH_SEED").env("RUST_LOG", "warn");
    c
}

fn config_in(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

fn csv_files(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut v: Vec<(PathBuf, Vec<u8>)> = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .map(|e| (e.path().strip_prefix(root).unwrap().to_path_buf(), fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn smoke_run_has_six_ok_cells_and_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig::load(&config_in(tmp.path(), SMOKE)).unwrap();
    let m = run_bench(&cfg, 1).unwrap();
    assert_eq!(m.cells.len(), 6);
    assert!(m.cells.iter().all(|c| c.status == CellStatus::Ok));
    let out = tmp.path().join("out");
    for t in ["coverage_table.csv", "auc_table.csv"] {
        assert!(out.join("tables").join(t).is_file());
    }
    for c in &m.cells {
        let dir = out.join(c.artifact_dir.as_ref().unwrap());
        for f in ["scores.csv", "coverage.csv", "auc.csv", "coverage.svg", "auc.svg"] {
            assert!(dir.join(f).is_file(), "{}", dir.join(f).display());
        }
    }
    let parsed = RunManifest::parse(&fs::read_to_string(out.join("run_manifest.txt")).unwrap()).unwrap();
    assert_eq!(parsed.cells.len(), 6);
    assert_eq!(parsed.config_hash, cfg.hash().unwrap());
    // the copy alone reproduces the config
    let copy = RunConfig::from_toml(&fs::read_to_string(out.join("config.toml")).unwrap()).unwrap();
    assert_eq!(copy, cfg);
}

#[test]
fn missing_model_context_fails_cell_and_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMOKE.replace("kind = \"leverage\"", "kind = \"gpr_var\"");
    let status = bin().arg("bench").arg("--config").arg(config_in(tmp.path(), &text)).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let out = tmp.path().join("out");
    let m = RunManifest::parse(&fs::read_to_string(out.join("run_manifest.txt")).unwrap()).unwrap();
    let failed: Vec<_> = m.cells.iter().filter(|c| c.status != CellStatus::Ok).collect();
    assert_eq!(failed.len(), 2);
    for c in failed {
        assert_eq!(c.measure, "gpr_var");
        assert!(matches!(&c.status, CellStatus::Failed(r) if r.starts_with("MissingModelContext")));
        assert!(c.artifact_dir.is_none());
    }
    // completed cells are intact
    let s = read_scores_csv(fs::File::open(out.join("synth_sine/ridge/kappa/scores.csv")).unwrap()).unwrap();
    assert_eq!(s[0].len(), 30);
    let cov = fs::read_to_string(out.join("tables/coverage_table.txt")).unwrap();
    assert!(cov.contains("excluded"));
}

#[test]
fn config_errors_abort_with_exit_1_before_work() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMOKE.replace("seed = 4", "seed = 4\nsed = 5");
    let status = bin().arg("bench").arg("--config").arg(config_in(tmp.path(), &text)).status().unwrap();
    assert_eq!(status.code(), Some(1));
    assert!(!tmp.path().join("out").exists());

    let text = SMOKE.replace("kind = \"sine\", n = 60", "kind = \"sine\", n = 60 }\n[[datasets]]\npath = \"none.csv\"\ntarget = \"y\"\n#");
    let status = bin().arg("bench").arg("--config").arg(config_in(tmp.path(), &text)).status().unwrap();
    assert_eq!(status.code(), Some(1));
    assert!(!tmp.path().join("out/run_manifest.txt").exists());
}

#[test]
fn identical_runs_give_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::load(&config_in(tmp.path(), SMOKE)).unwrap();
    cfg.output_dir = tmp.path().join("a");
    run_bench(&cfg, 1).unwrap();
    cfg.output_dir = tmp.path().join("b");
    run_bench(&cfg, 2).unwrap();
    let (a, b) = (csv_files(&tmp.path().join("a")), csv_files(&tmp.path().join("b")));
    assert!(a.len() > 10);
    assert_eq!(a, b);
}

#[test]
fn tables_command_reproduces_bench_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig::load(&config_in(tmp.path(), SMOKE)).unwrap();
    run_bench(&cfg, 1).unwrap();
    let out = tmp.path().join("out");
    let before = csv_files(&out.join("tables"));
    let status = bin().arg("tables").arg("--dir").arg(&out).output().unwrap();
    assert!(status.status.success());
    assert_eq!(csv_files(&out.join("tables")), before);

    // a different percentile changes coverage but not the AUC
    let (t, _) = rebuild(&out, Some(50.0), None).unwrap();
    let old = fs::read_to_string(out.join("tables/auc_table.csv")).unwrap();
    assert_eq!(t.auc.to_csv(), old);
    assert_ne!(t.coverage.to_csv(), fs::read_to_string(out.join("tables/coverage_table.csv")).unwrap());
}

#[test]
fn score_matches_bench_values() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig::load(&config_in(tmp.path(), SMOKE)).unwrap();
    run_bench(&cfg, 1).unwrap();
    let ds = tmp.path().join("out/synth_sine");
    for (model, measure, dump) in [
        ("ridge", "kappa", ds.join("measures/kappa.json")),
        ("mlp", "ensemble_sd", ds.join("mlp/measures/ensemble_sd.json")),
    ] {
        let out = bin()
            .args(["score", "--model"])
            .arg(ds.join(model).join("model.json"))
            .arg("--measure")
            .arg(&dump)
            .arg("--input")
            .arg(ds.join("test_rows.csv"))
            .args(["--target", "y", "--preprocessor"])
            .arg(ds.join("preprocessor.json"))
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let scored = read_scores_csv(&out.stdout[..]).unwrap().remove(0);
        let bench = read_scores_csv(fs::File::open(ds.join(model).join(measure).join("scores.csv")).unwrap())
            .unwrap()
            .remove(0);
        assert_eq!(scored.point_ids, bench.point_ids);
        assert_eq!(scored.values, bench.values, "{model}/{measure}");
        assert_eq!(scored.abs_errors, bench.abs_errors, "{model}/{measure}");
    }
}

#[test]
fn score_examples_on_training_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig::load(&config_in(tmp.path(), SMOKE)).unwrap();
    run_bench(&cfg, 1).unwrap();
    let ds = tmp.path().join("out/synth_sine");
    // raw training rows, regenerated with the run seed
    let prefix = tmp.path().join("syn");
    adbench_cli::synth(adbench::dataset::synth::SynthKind::Sine, 60, 0.1, true, 4, &prefix).unwrap();
    let mut train = fs::read_to_string(tmp.path().join("syn_train.csv")).unwrap();
    // duplicate the first training row under a new id
    let first = train.lines().nth(1).unwrap().to_string();
    let rest = first.split_once(',').unwrap().1;
    train.push_str(&format!("9999,{rest}\n"));
    let input = tmp.path().join("train_dup.csv");
    fs::write(&input, train).unwrap();

    let run = |model: &str, dump: PathBuf| {
        let out = bin()
            .args(["score", "--model"])
            .arg(ds.join(model).join("model.json"))
            .arg("--measure")
            .arg(dump)
            .arg("--input")
            .arg(&input)
            .args(["--target", "y", "--preprocessor"])
            .arg(ds.join("preprocessor.json"))
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.lines().next().unwrap().ends_with(",prediction"));
        read_scores_csv(text.as_bytes()).unwrap().remove(0)
    };
    let sd = run("mlp", ds.join("mlp/measures/ensemble_sd.json"));
    assert_eq!(sd.len(), 61);
    assert!(sd.values.iter().all(|&v| v >= 0.0));

    // a min_kappa dump fitted on the same training split
    let mut c = cfg.clone();
    c.measures = vec![adbench_cli::config::MeasureSpec { kind: adbench::measures::MeasureKind::MinKappa, auxiliary: false }];
    c.output_dir = tmp.path().join("mk");
    run_bench(&c, 1).unwrap();
    let mk = run("ridge", tmp.path().join("mk/synth_sine/measures/min_kappa.json"));
    let dup = mk.point_ids.iter().position(|&id| id == 9999).unwrap();
    assert_eq!(mk.values[dup], 0.0);
    assert!(mk.values.iter().all(|&v| v == 0.0), "every training row is its own nearest neighbour");
}

#[test]
fn score_without_target_gives_nan_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig::load(&config_in(tmp.path(), SMOKE)).unwrap();
    run_bench(&cfg, 1).unwrap();
    let ds = tmp.path().join("out/synth_sine");
    let rows = fs::read_to_string(ds.join("test_rows.csv")).unwrap();
    let stripped: String = rows
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n")
        .collect();
    let input = tmp.path().join("unlabeled.csv");
    fs::write(&input, stripped).unwrap();
    let out = bin()
        .args(["score", "--model"])
        .arg(ds.join("ridge/model.json"))
        .arg("--measure")
        .arg(ds.join("measures/kappa.json"))
        .arg("--input")
        .arg(&input)
        .args(["--target", "y", "--preprocessor"])
        .arg(ds.join("preprocessor.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = read_scores_csv(&out.stdout[..]).unwrap().remove(0);
    assert!(s.abs_errors.iter().all(|e| e.is_nan()));
    assert!(s.values.iter().all(|v| v.is_finite()));
}

#[test]
fn score_rejects_wrong_dump_version() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig::load(&config_in(tmp.path(), SMOKE)).unwrap();
    run_bench(&cfg, 1).unwrap();
    let ds = tmp.path().join("out/synth_sine");
    let dump = fs::read_to_string(ds.join("measures/kappa.json")).unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, dump.replace("\"format_version\":1", "\"format_version\":99")).unwrap();
    let out = bin()
        .args(["score", "--model"])
        .arg(ds.join("ridge/model.json"))
        .arg("--measure")
        .arg(&bad)
        .arg("--input")
        .arg(ds.join("test_rows.csv"))
        .args(["--target", "y"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
}

fn synth_cmd(dir: &Path, args: &[&str]) -> (String, String) {
    let prefix = dir.join("s");
    let status = bin().arg("synth").args(args).arg("--out-prefix").arg(&prefix).status().unwrap();
    assert!(status.success());
    (
        fs::read_to_string(dir.join("s_train.csv")).unwrap(),
        fs::read_to_string(dir.join("s_test.csv")).unwrap(),
    )
}

fn column(text: &str, j: usize) -> Vec<f64> {
    text.lines().skip(1).map(|l| l.split(',').nth(j).unwrap().parse().unwrap()).collect()
}

#[test]
fn synth_linear_without_noise_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let (train, test) = synth_cmd(tmp.path(), &["--kind", "linear", "--n", "50", "--seed", "1"]);
    for t in [train, test] {
        assert_eq!(t.lines().next().unwrap(), "point_id,x,y");
        for (x, y) in column(&t, 1).into_iter().zip(column(&t, 2)) {
            assert_eq!(y, 2.0 * x + 1.0);
            assert!((-1.0..=1.0).contains(&x));
        }
    }
}

#[test]
fn synth_is_reproducible_and_extrapolates() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["--kind", "sine", "--n", "200", "--noise", "0.1", "--extrapolate", "--seed", "7"];
    let a = synth_cmd(tmp.path(), &args);
    let b = synth_cmd(tmp.path(), &args);
    assert_eq!(a, b);
    assert!(column(&a.0, 1).iter().all(|x| (-1.0..=1.0).contains(x)));
    let xs = column(&a.1, 1);
    assert_eq!(xs.len(), 100);
    assert!(xs.iter().any(|&x| x > 1.0));
    assert!(xs.iter().filter(|&&x| x > 1.0).all(|&x| (2.0..=3.0).contains(&x)));
}

#[test]
fn seed_precedence_flag_then_env_then_default() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = |env: Option<&str>, flag: Option<&str>| {
        let prefix = tmp.path().join("p");
        let mut c = bin();
        c.args(["synth", "--kind", "sine", "--n", "20", "--noise", "0.5", "--out-prefix"]).arg(&prefix);
        if let Some(e) = env {
            c.env("AD_BENCH_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        assert!(c.status().unwrap().success());
        fs::read_to_string(tmp.path().join("p_train.csv")).unwrap()
    };
    let s3 = gen(None, Some("3"));
    let s5 = gen(None, Some("5"));
    assert_ne!(s3, s5);
    assert_eq!(gen(Some("5"), None), s5);
    assert_eq!(gen(Some("5"), Some("3")), s3);
    assert_eq!(gen(None, None), gen(None, Some("0")));
}
