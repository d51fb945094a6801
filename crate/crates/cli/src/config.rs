//! Run configuration: defaults, a TOML file, then `--set key=value`
//! overrides, in increasing precedence.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use driveprof_core::eval::DEFAULT_WINDOWS;
use driveprof_core::TrainConfig;

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    #[default]
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    pub dtype: Dtype,
    /// Frame rate after resampling.
    pub rate_hz: u32,
    /// Session directory names feeding training. Each must hold normal
    /// driving only. Empty means the normal windows of every session.
    pub train_sessions: Vec<String>,
    /// Window sizes evaluated by `eval`.
    pub windows: Vec<usize>,
    /// Reuse `<dir>/w<W>/model.ckpt` instead of training in `eval`.
    pub checkpoint_dir: Option<PathBuf>,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            dtype: Dtype::F32,
            rate_hz: 50,
            train_sessions: Vec::new(),
            windows: DEFAULT_WINDOWS.to_vec(),
            checkpoint_dir: None,
            train: TrainConfig::default(),
        }
    }
}

/// Where each setting came from, kept in run manifests.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConfigSource {
    pub file: Option<PathBuf>,
    pub overrides: Vec<String>,
}

/// Parses the right-hand side of an override as a TOML value; anything
/// that does not parse is taken as a string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), Failure> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Failure::Config(format!("override {assignment:?} is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Failure::Config(format!("bad override key {key:?}")));
    }
    let mut node = table;
    for part in &path[..path.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Failure::Config(format!("override {key:?}: {part} is not a table")))?;
    }
    node.insert(path[path.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

pub fn resolve(
    file: Option<&Path>,
    overrides: &[String],
) -> Result<(RunConfig, ConfigSource), Failure> {
    let mut table = match file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            text.parse::<Table>()
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let config: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Failure::Config(e.to_string()))?;
    config.train.validate().map_err(Failure::from)?;
    if config.windows.is_empty() || config.windows.contains(&0) {
        return Err(Failure::Config(
            "windows must be a non-empty list of positive sizes".into(),
        ));
    }
    Ok((
        config,
        ConfigSource {
            file: file.map(Path::to_path_buf),
            overrides: overrides.to_vec(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            "dtype = \"f64\"\n[train]\nepochs = 3\nhidden_size = 8\n",
        )
        .unwrap();
        let (cfg, src) = resolve(
            Some(&path),
            &["train.epochs=5".into(), "data_dir=data/x".into()],
        )
        .unwrap();
        assert_eq!(cfg.train.epochs, 5);
        assert_eq!(cfg.train.hidden_size, 8);
        assert_eq!(cfg.train.num_layers, TrainConfig::default().num_layers);
        assert_eq!(cfg.dtype, Dtype::F64);
        assert_eq!(cfg.data_dir, Some(PathBuf::from("data/x")));
        assert_eq!(src.overrides.len(), 2);
    }

    #[test]
    fn nested_optimizer_override() {
        let (cfg, _) = resolve(None, &["train.optimizer.learning_rate=0.01".into()]).unwrap();
        assert_eq!(cfg.train.optimizer.learning_rate, 0.01);
    }

    #[test]
    fn bad_settings_are_config_failures() {
        assert!(matches!(
            resolve(None, &["train.epochz=1".into()]),
            Err(Failure::Config(_))
        ));
        assert!(matches!(
            resolve(None, &["noequals".into()]),
            Err(Failure::Config(_))
        ));
        assert!(matches!(
            resolve(None, &["train.window_size=0".into()]),
            Err(Failure::Config(_))
        ));
    }
}
