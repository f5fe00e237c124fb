//! Stage-level behaviour of the companion crate on small synthetic runs.

use std::fs;
use std::path::Path;
use std::process::Command;

use tempfile::TempDir;
use trust_siot::artifact::{with_header, RunManifest};
use trust_siot::config::RunConfig;
use trust_siot::error::{FormatError, Stage, StageError};
use trust_siot::stages::{self, Layout, SweepAxis};
use trust_siot_core::synthetic::SyntheticConfig;

const BIN: &str = env!("CARGO_BIN_EXE_trust-siot");

/// Small settings that keep one full run well under a second.
const QUICK: &[&str] = &[
    "kge.dim=8",
    "kge.epochs=5",
    "kge.batch=64",
    "mlp.grid=4,8",
    "mlp.max_epochs=60",
    "mlp.lr=0.01",
    "k_folds=3",
    "seed=11",
];

fn synth_dataset(dir: &Path) -> std::path::PathBuf {
    let cfg = SyntheticConfig {
        n_objects: 60,
        ratings_per_object: 6,
        n_siot_objects: 80,
        ..SyntheticConfig::default()
    };
    stages::synth(&cfg, dir, "toy").unwrap()
}

fn quick_config(dataset: &Path, out: &Path) -> RunConfig {
    let mut pairs: Vec<String> = QUICK.iter().map(|s| s.to_string()).collect();
    pairs.push(format!("dataset={}", dataset.display()));
    pairs.push(format!("output={}", out.display()));
    RunConfig::load(None, Vec::new(), pairs.iter().map(String::as_str)).unwrap()
}

fn format_error(e: &StageError) -> &FormatError {
    e.source
        .downcast_ref::<FormatError>()
        .unwrap_or_else(|| panic!("expected a format error, got {e}"))
}

#[test]
fn stage_by_stage_matches_pipeline() {
    let tmp = TempDir::new().unwrap();
    let data = synth_dataset(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));

    let cfg_a = quick_config(&data, &a);
    let whole = stages::pipeline(&cfg_a, &Layout::new(&a)).unwrap();

    let cfg_b = quick_config(&data, &b);
    let out = Layout::new(&b);
    stages::ingest(&cfg_b, &out).unwrap();
    stages::dtm(&cfg_b, &out).unwrap();
    stages::credibility(&cfg_b, &out).unwrap();
    stages::kge_train(&cfg_b, &out).unwrap();
    stages::features(&cfg_b, &out).unwrap();
    stages::train(&cfg_b, &out).unwrap();
    let report = stages::evaluate_stage(&cfg_b, &out).unwrap();

    assert_eq!(report, whole.report);
    for name in [
        "graph.tsv",
        "scores.csv",
        "embeddings.tsv",
        "features.tsv",
        "model.tsv",
        "metrics.csv",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn pipeline_is_byte_for_byte_deterministic() {
    let tmp = TempDir::new().unwrap();
    let data = synth_dataset(tmp.path());
    let mut hashes = Vec::new();
    for run in ["r1", "r2"] {
        let dir = tmp.path().join(run);
        let p = stages::pipeline(&quick_config(&data, &dir), &Layout::new(&dir)).unwrap();
        hashes.push(p.manifest.get("artifact.metrics.blob").unwrap().to_string());
        let mut m = RunManifest::default();
        m.hash_file("x", &dir.join("model.tsv")).unwrap();
        hashes.push(m.get("x.blob").unwrap().to_string());
    }
    assert_eq!(hashes[0], hashes[2]);
    assert_eq!(hashes[1], hashes[3]);
    let m1 = fs::read(tmp.path().join("r1/metrics.csv")).unwrap();
    let m2 = fs::read(tmp.path().join("r2/metrics.csv")).unwrap();
    assert_eq!(m1, m2);
}

#[test]
fn corrupted_artifacts_fail_before_use() {
    let tmp = TempDir::new().unwrap();
    let data = synth_dataset(tmp.path());
    let dir = tmp.path().join("run");
    let cfg = quick_config(&data, &dir);
    let out = Layout::new(&dir);
    stages::pipeline(&cfg, &out).unwrap();

    // One flipped digit in the embedding body breaks the checksum.
    let emb = fs::read_to_string(out.embeddings()).unwrap();
    let (header, body) = emb.split_once('\n').unwrap();
    let pos = body.find(|c: char| c.is_ascii_digit() && c != '9').unwrap();
    let mut tampered = body.to_string();
    tampered.replace_range(pos..pos + 1, "9");
    fs::write(out.embeddings(), format!("{header}\n{tampered}")).unwrap();
    let err = stages::features(&cfg, &out).unwrap_err();
    assert_eq!(err.stage, Stage::Features);
    assert!(matches!(format_error(&err), FormatError::Checksum { .. }), "{err}");
    fs::write(out.embeddings(), &emb).unwrap();
    stages::features(&cfg, &out).unwrap();

    // A re-signed model with a missing row passes the checksum, so only
    // the shape check can reject it.
    let model = fs::read_to_string(out.model()).unwrap();
    let (header, body) = model.split_once('\n').unwrap();
    let hidden: usize = header
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("hidden="))
        .unwrap()
        .parse()
        .unwrap();
    let mut lines: Vec<&str> = body.lines().collect();
    let row = lines.iter().position(|l| l.starts_with("output_bias")).unwrap();
    lines.remove(row);
    let short: String = lines.iter().map(|l| format!("{l}\n")).collect();
    let fields = [
        ("inputs", "5".to_string()),
        ("hidden", hidden.to_string()),
        ("classes", "3".to_string()),
    ];
    fs::write(out.model(), with_header("mlp", &fields, &short)).unwrap();
    let err = stages::evaluate_stage(&cfg, &out).unwrap_err();
    assert_eq!(err.stage, Stage::Evaluate);
    assert!(matches!(format_error(&err), FormatError::Shape { .. }), "{err}");
}

#[test]
fn sweep_writes_one_row_per_value_and_skips_invalid_ones() {
    let tmp = TempDir::new().unwrap();
    let data = synth_dataset(tmp.path());
    let dir = tmp.path().join("sweep");
    let cfg = quick_config(&data, &dir);
    let out = Layout::new(&dir);
    let rows = stages::sweep(&cfg, &out, SweepAxis::TrainFraction, &[0.5, 0.8, 1.5]).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].result.is_ok() && rows[1].result.is_ok());
    assert!(rows[2].result.is_err());
    let csv = fs::read_to_string(out.sweep(SweepAxis::TrainFraction)).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().last().unwrap().contains("skipped"));
    let metrics = fs::read_to_string(out.metrics()).unwrap();
    assert_eq!(metrics.lines().count(), 3);

    let rows = stages::sweep(&cfg, &out, SweepAxis::Interactions, &[0.5, 1.0]).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(out.sweep(SweepAxis::Interactions).exists());
}

#[test]
fn cli_runs_end_to_end_and_reports_failing_stage() {
    let tmp = TempDir::new().unwrap();
    let synth = Command::new(BIN)
        .args(["synth", "--objects", "50", "--siot-objects", "60", "--dir"])
        .arg(tmp.path())
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    assert!(synth.status.success(), "{}", String::from_utf8_lossy(&synth.stderr));
    let data = tmp.path().join("dataset.txt");
    let out = tmp.path().join("out");

    let mut cmd = Command::new(BIN);
    cmd.arg("pipeline")
        .arg("--dataset")
        .arg(&data)
        .arg("--out")
        .arg(&out)
        .env("RUST_LOG", "off");
    for kv in QUICK.iter().filter(|kv| !kv.starts_with("kge.dim=")) {
        cmd.args(["--set", kv]);
    }
    // Environment overrides sit below `--set` pairs.
    cmd.env("TRUSTSIOT_KGE__DIM", "6").env("TRUSTSIOT_SEED", "999");
    let run = cmd.output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("f1="));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config.kge.dim = 6\n"), "{manifest}");
    assert!(manifest.contains("config.seed = 11\n"), "{manifest}");

    fs::write(
        out.join("model.tsv"),
        "# trust-siot mlp inputs=5 hidden=4 classes=3 sha256=00\n",
    )
    .unwrap();
    let eval = Command::new(BIN)
        .arg("evaluate")
        .arg("--dataset")
        .arg(&data)
        .arg("--out")
        .arg(&out)
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    assert!(!eval.status.success());
    let stderr = String::from_utf8_lossy(&eval.stderr);
    assert!(stderr.contains("stage `evaluate` failed"), "{stderr}");
    assert!(stderr.contains("checksum"), "{stderr}");

    let bad = Command::new(BIN)
        .args(["dtm", "--set", "lambda=-1", "--out"])
        .arg(&out)
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    assert!(!bad.status.success());
    let stderr = String::from_utf8_lossy(&bad.stderr);
    assert!(stderr.contains("stage `config` failed"), "{stderr}");
}

#[test]
fn missing_inputs_name_the_stage() {
    let tmp = TempDir::new().unwrap();
    let cfg = RunConfig::load(None, Vec::new(), ["output=/nonexistent/never"]).unwrap();
    let out = Layout::new(tmp.path());
    assert_eq!(stages::ingest(&cfg, &out).unwrap_err().stage, Stage::Ingest);
    assert_eq!(stages::dtm(&cfg, &out).unwrap_err().stage, Stage::Dtm);
    assert_eq!(stages::credibility(&cfg, &out).unwrap_err().stage, Stage::Credibility);
    assert_eq!(stages::kge_train(&cfg, &out).unwrap_err().stage, Stage::KgeTrain);
    assert_eq!(stages::features(&cfg, &out).unwrap_err().stage, Stage::Features);
    assert_eq!(stages::train(&cfg, &out).unwrap_err().stage, Stage::Train);
    assert_eq!(stages::evaluate_stage(&cfg, &out).unwrap_err().stage, Stage::Evaluate);
}
