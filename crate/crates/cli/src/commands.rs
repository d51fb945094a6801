use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use driveprof_core::checkpoint::{
    checkpoint_dtype, load_checkpoint, load_checkpoint_as, save_checkpoint,
};
use driveprof_core::digest::sha256_hex;
use driveprof_core::eval::{
    curve_to_csv, emit_report, evaluate_records, grid_from_csv, record_window, window_config,
    GridResult, ReportFormat,
};
use driveprof_core::ingest::{load_dataset_dir, load_session_dir, SensorKind, EVENTS_FILE};
use driveprof_core::pipeline::{
    prepare_experiment, scores_to_csv, train, Detector, TrainManifest, TrainPool,
};
use driveprof_core::preprocess::{
    apply_scaler, frames_from_session, slide_windows_with, FrameSeries, WindowLabeling,
};
use driveprof_core::synth::{generate_suite, null_spec, standard_suite, write_suite, SynthSuite};
use driveprof_core::{Behavior, Scalar, ScalerParams, Session};

use crate::config::{ConfigSource, Dtype, RunConfig};
use crate::failure::Failure;

pub type CmdResult = Result<(), Failure>;

/// Writes to stdout; a closed pipe (`| head`) ends output quietly.
fn say(text: &str) -> CmdResult {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Failure::runtime(e)),
        _ => Ok(()),
    }
}

const MODEL_FILE: &str = "model.ckpt";
const SCALER_FILE: &str = "scaler.toml";
const MANIFEST_FILE: &str = "manifest.toml";
const CONFIG_FILE: &str = "config.toml";

/// Written next to every run's outputs.
#[derive(Serialize)]
struct RunManifest<'a, D: Serialize> {
    command: &'a str,
    version: &'a str,
    dataset_hash: Option<String>,
    sessions: Vec<String>,
    source: &'a ConfigSource,
    config: Option<&'a RunConfig>,
    /// File name to SHA-256 of its bytes.
    outputs: BTreeMap<String, String>,
    details: D,
}

impl<'a, D: Serialize> RunManifest<'a, D> {
    fn new(
        command: &'a str,
        source: &'a ConfigSource,
        config: Option<&'a RunConfig>,
        details: D,
    ) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            dataset_hash: None,
            sessions: Vec::new(),
            source,
            config,
            outputs: BTreeMap::new(),
            details,
        }
    }

    fn write(&self, path: &Path) -> CmdResult {
        let text = toml::to_string(self).map_err(Failure::runtime)?;
        fs::write(path, text).map_err(Failure::runtime)
    }
}

/// Writes `bytes` and records the file's hash under `key`.
fn emit(
    outputs: &mut BTreeMap<String, String>,
    key: String,
    path: &Path,
    bytes: &[u8],
) -> CmdResult {
    fs::write(path, bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    outputs.insert(key, sha256_hex(bytes));
    Ok(())
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))
}

fn is_session_dir(path: &Path) -> bool {
    SensorKind::ALL
        .iter()
        .any(|s| path.join(s.file_name()).exists())
        || path.join(EVENTS_FILE).exists()
}

/// A session directory or a directory of session directories.
fn load_sessions(path: &Path) -> Result<Vec<Session>, Failure> {
    if !path.is_dir() {
        return Err(Failure::Data(format!(
            "{} is not a directory",
            path.display()
        )));
    }
    let sessions = if is_session_dir(path) {
        vec![load_session_dir(path)?]
    } else {
        load_dataset_dir(path)?
    };
    if sessions.is_empty() {
        return Err(Failure::Data(format!(
            "no sessions under {}",
            path.display()
        )));
    }
    Ok(sessions)
}

/// Hash over every input file, in session then file order.
fn dataset_hash(sessions: &[Session], root: &Path) -> Result<String, Failure> {
    let single = is_session_dir(root);
    let mut buf = Vec::new();
    for s in sessions {
        let dir = if single {
            root.to_path_buf()
        } else {
            root.join(&s.name)
        };
        let mut names: Vec<String> = SensorKind::ALL.iter().map(|k| k.file_name()).collect();
        names.push(EVENTS_FILE.to_string());
        for name in names {
            let path = dir.join(&name);
            if let Ok(bytes) = fs::read(&path) {
                buf.extend_from_slice(format!("{}/{name}\0{}\0", s.name, bytes.len()).as_bytes());
                buf.extend_from_slice(&bytes);
            }
        }
    }
    Ok(sha256_hex(&buf))
}

struct Dataset {
    names: Vec<String>,
    series: Vec<FrameSeries<f64>>,
    hash: String,
}

fn load_dataset(config: &RunConfig) -> Result<Dataset, Failure> {
    let dir = config.data_dir.as_deref().ok_or_else(|| {
        Failure::Config("data_dir is not set (use --data or data_dir in the config)".into())
    })?;
    let sessions = load_sessions(dir)?;
    let hash = dataset_hash(&sessions, dir)?;
    let series = sessions
        .iter()
        .map(|s| frames_from_session(s, config.rate_hz))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        names: sessions.into_iter().map(|s| s.name).collect(),
        series,
        hash,
    })
}

fn train_pool(config: &RunConfig, names: &[String]) -> Result<TrainPool, Failure> {
    if config.train_sessions.is_empty() {
        return Ok(TrainPool::All);
    }
    let ids = config
        .train_sessions
        .iter()
        .map(|want| {
            names.iter().position(|n| n == want).ok_or_else(|| {
                Failure::Config(format!("train_sessions: no session named {want:?}"))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrainPool::Sessions(ids))
}

pub fn ingest(paths: &[PathBuf]) -> CmdResult {
    for path in paths {
        for session in load_sessions(path)? {
            say(&format!("session {}\n{}", session.name, session.summary()))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SynthDetails {
    seed: Option<u64>,
    spec_file: Option<PathBuf>,
}

pub fn synth(out: &Path, spec: Option<&Path>, seed: u64, with_null: bool) -> CmdResult {
    let suite = match spec {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            SynthSuite::from_toml(&text)?
        }
        None => {
            let mut sessions = standard_suite(seed);
            if with_null {
                sessions.push(null_spec(seed));
            }
            SynthSuite { sessions }
        }
    };
    let sessions = generate_suite(&suite.sessions)?;
    create_dir(out)?;
    write_suite(&sessions, out).map_err(Failure::runtime)?;

    let source = ConfigSource {
        file: spec.map(Path::to_path_buf),
        overrides: Vec::new(),
    };
    let details = SynthDetails {
        seed: spec.is_none().then_some(seed),
        spec_file: spec.map(Path::to_path_buf),
    };
    let mut manifest = RunManifest::new("synth", &source, None, details);
    emit(
        &mut manifest.outputs,
        "suite.toml".into(),
        &out.join("suite.toml"),
        suite.to_toml().as_bytes(),
    )?;
    for s in &sessions {
        for name in SensorKind::ALL
            .iter()
            .map(|k| k.file_name())
            .chain([EVENTS_FILE.to_string()])
        {
            let bytes = fs::read(out.join(&s.name).join(&name)).map_err(Failure::runtime)?;
            manifest
                .outputs
                .insert(format!("{}/{name}", s.name), sha256_hex(&bytes));
        }
    }
    manifest.dataset_hash = Some(dataset_hash(&sessions, out)?);
    manifest.sessions = sessions.iter().map(|s| s.name.clone()).collect();
    manifest.write(&out.join(MANIFEST_FILE))?;
    say(&format!(
        "wrote {} sessions to {}\n",
        sessions.len(),
        out.display()
    ))
}

pub fn train_cmd(config: &RunConfig, source: &ConfigSource, out: &Path) -> CmdResult {
    let data = load_dataset(config)?;
    let pool = train_pool(config, &data.names)?;
    create_dir(out)?;
    match config.dtype {
        Dtype::F32 => train_into::<f32>(config, source, &data, &pool, out),
        Dtype::F64 => train_into::<f64>(config, source, &data, &pool, out),
    }
}

fn train_into<T: Scalar>(
    config: &RunConfig,
    source: &ConfigSource,
    data: &Dataset,
    pool: &TrainPool,
    out: &Path,
) -> CmdResult {
    let exp = prepare_experiment::<T>(&data.series, &config.train, pool)?;
    let mut outcome = train(&config.train, &exp.train)?;
    outcome.manifest.scaler_hash = Some(exp.scaler.artifact_hash());
    say(&format!(
        "trained on {} windows, final loss {:.6e}\n",
        outcome.manifest.train_windows, outcome.manifest.final_loss
    ))?;
    let mut manifest = RunManifest::new("train", source, Some(config), &outcome.manifest);
    write_model(
        &mut manifest.outputs,
        "",
        out,
        &outcome.detector,
        &exp.scaler,
    )?;
    emit(
        &mut manifest.outputs,
        CONFIG_FILE.into(),
        &out.join(CONFIG_FILE),
        toml::to_string(config)
            .map_err(Failure::runtime)?
            .as_bytes(),
    )?;
    manifest.dataset_hash = Some(data.hash.clone());
    manifest.sessions = data.names.clone();
    manifest.write(&out.join(MANIFEST_FILE))
}

fn write_model<T: Scalar>(
    outputs: &mut BTreeMap<String, String>,
    prefix: &str,
    dir: &Path,
    detector: &Detector<T>,
    scaler: &ScalerParams<T>,
) -> CmdResult {
    let bytes = save_checkpoint(detector).map_err(Failure::runtime)?;
    emit(
        outputs,
        format!("{prefix}{MODEL_FILE}"),
        &dir.join(MODEL_FILE),
        &bytes,
    )?;
    emit(
        outputs,
        format!("{prefix}{SCALER_FILE}"),
        &dir.join(SCALER_FILE),
        scaler.to_artifact().as_bytes(),
    )
}

#[derive(Serialize)]
struct ScoreDetails<'a> {
    checkpoint: &'a Path,
    scaler: &'a Path,
    data: &'a Path,
    rate_hz: u32,
    dtype: &'a str,
    windows_scored: usize,
}

pub fn score(checkpoint: &Path, scaler: &Path, data: &Path, out: &Path, rate_hz: u32) -> CmdResult {
    let bytes = fs::read(checkpoint)
        .map_err(|e| Failure::Data(format!("{}: {e}", checkpoint.display())))?;
    match checkpoint_dtype(&bytes)? {
        "f32" => score_with::<f32>(&bytes, checkpoint, scaler, data, out, rate_hz),
        _ => score_with::<f64>(&bytes, checkpoint, scaler, data, out, rate_hz),
    }
}

fn score_with<T: Scalar>(
    bytes: &[u8],
    checkpoint: &Path,
    scaler_path: &Path,
    data: &Path,
    out: &Path,
    rate_hz: u32,
) -> CmdResult {
    let detector: Detector<T> = load_checkpoint(bytes)?;
    let text = fs::read_to_string(scaler_path)
        .map_err(|e| Failure::Data(format!("{}: {e}", scaler_path.display())))?;
    let scaler = ScalerParams::<T>::from_artifact(&text)?;
    let sessions = load_sessions(data)?;
    let w = detector.window_size;
    let mut records = Vec::new();
    for (i, session) in sessions.iter().enumerate() {
        let series = frames_from_session(session, rate_hz)?;
        if series.len() <= w {
            warn!(
                "session {} has {} frames, not more than window {w}; skipped",
                session.name,
                series.len()
            );
            continue;
        }
        let scaled = apply_scaler(&series.cast::<T>(), &scaler);
        let pairs: Vec<_> = slide_windows_with(&scaled, w, WindowLabeling::Target)?
            .into_iter()
            .map(|p| p.with_session(i))
            .collect();
        records.extend(detector.score_dataset(&pairs)?);
    }
    let source = ConfigSource::default();
    let details = ScoreDetails {
        checkpoint,
        scaler: scaler_path,
        data,
        rate_hz,
        dtype: T::DTYPE,
        windows_scored: records.len(),
    };
    let mut manifest = RunManifest::new("score", &source, None, details);
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    emit(
        &mut manifest.outputs,
        name,
        out,
        scores_to_csv(&records).as_bytes(),
    )?;
    manifest.dataset_hash = Some(dataset_hash(&sessions, data)?);
    manifest.sessions = sessions.iter().map(|s| s.name.clone()).collect();
    let mut manifest_path = out.as_os_str().to_owned();
    manifest_path.push(".manifest.toml");
    manifest.write(Path::new(&manifest_path))?;
    say(&format!(
        "scored {} windows from {} sessions\n",
        records.len(),
        sessions.len()
    ))
}

#[derive(Serialize)]
struct EvalDetails {
    grand_mean: Option<f64>,
    windows: BTreeMap<String, WindowDetails>,
}

#[derive(Serialize)]
struct WindowDetails {
    seed: u64,
    model_hash: String,
    scaler_hash: String,
    eval_windows: usize,
    train: Option<TrainManifest>,
}

pub fn eval(config: &RunConfig, source: &ConfigSource, out: &Path) -> CmdResult {
    let data = load_dataset(config)?;
    let pool = train_pool(config, &data.names)?;
    create_dir(out)?;
    match config.dtype {
        Dtype::F32 => eval_into::<f32>(config, source, &data, &pool, out),
        Dtype::F64 => eval_into::<f64>(config, source, &data, &pool, out),
    }
}

fn eval_into<T: Scalar>(
    config: &RunConfig,
    source: &ConfigSource,
    data: &Dataset,
    pool: &TrainPool,
    out: &Path,
) -> CmdResult {
    let mut grid = GridResult::new(config.windows.clone(), Behavior::AGGRESSIVE.to_vec());
    let mut outputs = BTreeMap::new();
    let mut provenance = vec![("dataset".to_string(), data.hash.clone())];
    let mut details = EvalDetails {
        grand_mean: None,
        windows: BTreeMap::new(),
    };
    for &w in &config.windows {
        let wcfg = window_config(&config.train, w);
        let exp = prepare_experiment::<T>(&data.series, &wcfg, pool)?;
        let wdir = out.join(format!("w{w}"));
        create_dir(&wdir)?;
        let prefix = format!("w{w}/");
        let (detector, train_manifest) = match &config.checkpoint_dir {
            Some(dir) => {
                let src = dir.join(format!("w{w}"));
                let path = src.join(MODEL_FILE);
                let bytes = fs::read(&path)
                    .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
                let det: Detector<T> = load_checkpoint_as(&bytes)?;
                if det.window_size != w {
                    return Err(Failure::Data(format!(
                        "{} was trained with window {}, expected {w}",
                        path.display(),
                        det.window_size
                    )));
                }
                match fs::read(src.join(SCALER_FILE)) {
                    Ok(saved) if sha256_hex(&saved) != exp.scaler.artifact_hash() => {
                        return Err(Failure::Data(format!(
                            "{}: scaler differs from the one refitted on this data",
                            src.join(SCALER_FILE).display()
                        )));
                    }
                    Ok(_) => {}
                    Err(_) => warn!(
                        "no scaler next to {}; using the refitted one",
                        path.display()
                    ),
                }
                (det, None)
            }
            None => {
                let mut outcome = train(&wcfg, &exp.train)?;
                outcome.manifest.scaler_hash = Some(exp.scaler.artifact_hash());
                write_model(&mut outputs, &prefix, &wdir, &outcome.detector, &exp.scaler)?;
                (outcome.detector, Some(outcome.manifest))
            }
        };
        let model_hash = sha256_hex(&save_checkpoint(&detector).map_err(Failure::runtime)?);
        let records = detector.score_dataset(&exp.eval)?;
        emit(
            &mut outputs,
            format!("{prefix}scores.csv"),
            &wdir.join("scores.csv"),
            scores_to_csv(&records).as_bytes(),
        )?;
        let (rocs, pooled) = evaluate_records(&records, w);
        for (label, roc) in &rocs {
            let name = format!("roc_{}.csv", label.name());
            emit(
                &mut outputs,
                format!("{prefix}{name}"),
                &wdir.join(&name),
                curve_to_csv(roc).as_bytes(),
            )?;
        }
        record_window(&mut grid, w, &rocs, pooled.as_ref());
        info!("W={w}: mean AUC {:?}", grid.window_mean(w));
        provenance.push((format!("w{w}.model"), model_hash.clone()));
        provenance.push((format!("w{w}.scaler"), exp.scaler.artifact_hash()));
        details.windows.insert(
            format!("w{w}"),
            WindowDetails {
                seed: wcfg.seed,
                model_hash,
                scaler_hash: exp.scaler.artifact_hash(),
                eval_windows: records.len(),
                train: train_manifest,
            },
        );
    }
    details.grand_mean = grid.grand_mean();
    emit(
        &mut outputs,
        "grid.csv".into(),
        &out.join("grid.csv"),
        emit_report(&grid, ReportFormat::Csv, &[]).as_bytes(),
    )?;
    let table = emit_report(&grid, ReportFormat::Table, &provenance);
    emit(
        &mut outputs,
        "grid.txt".into(),
        &out.join("grid.txt"),
        table.as_bytes(),
    )?;
    emit(
        &mut outputs,
        CONFIG_FILE.into(),
        &out.join(CONFIG_FILE),
        toml::to_string(config)
            .map_err(Failure::runtime)?
            .as_bytes(),
    )?;
    say(&table)?;
    let mut manifest = RunManifest::new("eval", source, Some(config), details);
    manifest.outputs = outputs;
    manifest.dataset_hash = Some(data.hash.clone());
    manifest.sessions = data.names.clone();
    manifest.write(&out.join(MANIFEST_FILE))
}

pub fn report(grid_path: &Path, format: ReportFormat, out: Option<&Path>) -> CmdResult {
    let text = fs::read_to_string(grid_path)
        .map_err(|e| Failure::Data(format!("{}: {e}", grid_path.display())))?;
    let grid = grid_from_csv(&text)?;
    let rendered = emit_report(
        &grid,
        format,
        &[("grid".into(), sha256_hex(text.as_bytes()))],
    );
    match out {
        Some(path) => fs::write(path, rendered).map_err(Failure::runtime),
        None => say(&rendered),
    }
}
