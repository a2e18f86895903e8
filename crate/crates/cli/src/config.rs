use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

/// Defaults read from `--config`; command-line flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub gt: Option<PathBuf>,
    pub preds: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub fraction: Option<f64>,
    pub schedule: Option<PathBuf>,
    pub threshold: Option<f64>,
    pub iou: Option<f64>,
    pub nms: Option<bool>,
    pub confidence: Option<f64>,
    pub bins: Option<usize>,
    pub jobs: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| {
            CliError::Usage(format!("config {}: {}", path.display(), e.lines().next().unwrap_or("")))
        })
    }
}

/// Flag value, else config value, else a usage error naming the flag.
pub fn require<T: Clone>(flag: Option<T>, config: &Option<T>, name: &str) -> Result<T, CliError> {
    flag.or_else(|| config.clone())
        .ok_or_else(|| CliError::Usage(format!("missing required --{name}")))
}
