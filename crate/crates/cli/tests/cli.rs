use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn driveprof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_driveprof"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = driveprof(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_data(tmp: &TempDir) -> std::path::PathBuf {
    let data = tmp.path().join("data");
    ok(&["synth", "-o", p(&data), "--seed", "4"]);
    data
}

const SMALL: &str = "train_sessions = [\"normal\"]\nwindows = [12, 8, 4, 2]\n\
[train]\nwindow_size = 8\nhidden_size = 3\nnum_layers = 1\nepochs = 2\nbatch_size = 128\n";

fn small_config(tmp: &TempDir) -> std::path::PathBuf {
    let path = tmp.path().join("run.toml");
    fs::write(&path, SMALL).unwrap();
    path
}

fn manifest(path: &Path) -> toml::Table {
    fs::read_to_string(path).unwrap().parse().unwrap()
}

#[test]
fn synth_then_ingest_reports_native_rates() {
    let tmp = TempDir::new().unwrap();
    let data = synth_data(&tmp);
    let names: Vec<String> = fs::read_dir(&data)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 7);
    let summary = ok(&["ingest", p(&data)]);
    assert_eq!(summary.matches("session ").count(), 7);
    for line in [
        "acc_x      samples=6000     rate=100.000 Hz",
        "linacc_y",
        "rate=25.000 Hz",
        "rate=10.000 Hz",
        "rate=50.000 Hz",
    ] {
        assert!(summary.contains(line), "missing {line:?}");
    }
}

#[test]
fn synth_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["synth", "-o", p(&a), "--seed", "9", "--null"]);
    ok(&["synth", "-o", p(&b), "--seed", "9", "--null"]);
    let (ma, mb) = (
        manifest(&a.join("manifest.toml")),
        manifest(&b.join("manifest.toml")),
    );
    assert_eq!(ma["outputs"], mb["outputs"]);
    assert_eq!(ma["dataset_hash"], mb["dataset_hash"]);
    // A suite file written by synth regenerates the same data.
    let c = tmp.path().join("c");
    ok(&["synth", "-o", p(&c), "--spec", p(&a.join("suite.toml"))]);
    assert_eq!(
        manifest(&c.join("manifest.toml"))["dataset_hash"],
        ma["dataset_hash"]
    );
}

#[test]
fn missing_channel_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let data = synth_data(&tmp);
    let session = data.join("normal");
    fs::remove_file(session.join("magnetometer.csv")).unwrap();
    let out = driveprof(&["ingest", p(&session)]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mag_x"), "{err}");
}

#[test]
fn training_is_deterministic_and_records_loss() {
    let tmp = TempDir::new().unwrap();
    let data = synth_data(&tmp);
    let cfg = small_config(&tmp);
    let hashes: Vec<String> = ["r1", "r2"]
        .iter()
        .map(|run| {
            let out = tmp.path().join(run);
            ok(&["train", "-c", p(&cfg), "--data", p(&data), "-o", p(&out)]);
            let m = manifest(&out.join("manifest.toml"));
            let losses = m["details"]["loss_history"].as_array().unwrap();
            assert_eq!(losses.len(), 2);
            assert!(losses.iter().all(|l| l.as_float().unwrap() > 0.0));
            assert_eq!(m["details"]["non_normal_windows"].as_integer(), Some(0));
            m["outputs"]["model.ckpt"].as_str().unwrap().to_string()
        })
        .collect();
    assert_eq!(hashes[0], hashes[1]);

    // The resolved config reproduces the run on its own.
    let again = tmp.path().join("r3");
    ok(&[
        "train",
        "-c",
        p(&tmp.path().join("r1/config.toml")),
        "-o",
        p(&again),
    ]);
    assert_eq!(
        manifest(&again.join("manifest.toml"))["outputs"]["model.ckpt"].as_str(),
        Some(hashes[0].as_str())
    );
}

#[test]
fn aggressive_training_session_is_refused() {
    let tmp = TempDir::new().unwrap();
    let data = synth_data(&tmp);
    let cfg = small_config(&tmp);
    let out = driveprof(&[
        "train",
        "-c",
        p(&cfg),
        "--data",
        p(&data),
        "--set",
        "train_sessions=[\"normal\", \"aggressive_brake\"]",
        "-o",
        p(&tmp.path().join("x")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-normal data in training set"));
}

#[test]
fn config_and_data_errors_have_distinct_codes() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("o");
    let bad_key = driveprof(&["train", "--set", "train.epochz=1", "-o", p(&out_dir)]);
    assert_eq!(bad_key.status.code(), Some(2));
    let no_data = driveprof(&["train", "-o", p(&out_dir)]);
    assert_eq!(no_data.status.code(), Some(2));
    let missing = driveprof(&[
        "train",
        "--data",
        p(&tmp.path().join("absent")),
        "-o",
        p(&out_dir),
    ]);
    assert_eq!(missing.status.code(), Some(3));
    let bad_ckpt = tmp.path().join("bad.ckpt");
    fs::write(&bad_ckpt, b"not a checkpoint").unwrap();
    let score = driveprof(&[
        "score",
        "--checkpoint",
        p(&bad_ckpt),
        "--scaler",
        p(&bad_ckpt),
        "--data",
        p(tmp.path()),
        "-o",
        p(&out_dir.join("s.csv")),
    ]);
    assert_eq!(score.status.code(), Some(3));
}

fn parse_grid(text: &str) -> Vec<(usize, String, Option<f64>)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].to_string(), f[2].parse().ok())
        })
        .collect()
}

#[test]
fn eval_builds_full_grid_and_reuses_checkpoints() {
    let tmp = TempDir::new().unwrap();
    let data = synth_data(&tmp);
    let cfg = small_config(&tmp);
    let first = tmp.path().join("eval");
    ok(&["eval", "-c", p(&cfg), "--data", p(&data), "-o", p(&first)]);

    let grid = fs::read_to_string(first.join("grid.csv")).unwrap();
    let cells: Vec<_> = parse_grid(&grid)
        .into_iter()
        .filter(|(_, label, _)| label != "pooled_aggressive")
        .collect();
    assert_eq!(cells.len(), 24);
    assert!(cells.iter().all(|c| c.2.is_some()));
    let grand = cells.iter().map(|c| c.2.unwrap()).sum::<f64>() / 24.0;
    let m = manifest(&first.join("manifest.toml"));
    let reported = m["details"]["grand_mean"].as_float().unwrap();
    assert!((grand - reported).abs() < 1e-12);
    let table = fs::read_to_string(first.join("grid.txt")).unwrap();
    assert!(table.contains(&format!("{grand:.4}")));
    assert!(first.join("w12/roc_aggressive_brake.csv").exists());

    let reuse = |name: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "eval",
            "-c",
            p(&cfg),
            "--data",
            p(&data),
            "--set",
            &format!("checkpoint_dir={:?}", p(&first)),
            "-o",
            p(&out),
        ]);
        fs::read(out.join("grid.txt")).unwrap()
    };
    let (a, b) = (reuse("again1"), reuse("again2"));
    assert_eq!(a, b);
    assert_eq!(a, table.as_bytes());

    let rendered = ok(&[
        "report",
        "--grid",
        p(&first.join("grid.csv")),
        "--format",
        "csv",
    ]);
    assert_eq!(rendered, grid);
}

#[test]
fn score_writes_one_row_per_window() {
    let tmp = TempDir::new().unwrap();
    let data = synth_data(&tmp);
    let cfg = small_config(&tmp);
    let run = tmp.path().join("run");
    ok(&["train", "-c", p(&cfg), "--data", p(&data), "-o", p(&run)]);
    let scores = tmp.path().join("scores/brake.csv");
    ok(&[
        "score",
        "--checkpoint",
        p(&run.join("model.ckpt")),
        "--scaler",
        p(&run.join("scaler.toml")),
        "--data",
        p(&data.join("aggressive_brake")),
        "-o",
        p(&scores),
    ]);
    let text = fs::read_to_string(&scores).unwrap();
    // 60 s session: 2996 frames at 50 Hz, window 8.
    assert_eq!(text.lines().count() - 1, 2996 - 8);
    assert!(text.contains("aggressive_brake"));
    assert!(tmp.path().join("scores/brake.csv.manifest.toml").exists());
}
