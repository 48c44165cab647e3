//! TOML configuration. Command-line flags win over these values, which win
//! over built-in defaults.

use std::path::Path;

use mas_core::lab::ExperimentConfig;
use mas_core::masnet::{FitConfig, SyntheticConfig, TrainConfig};
use serde::Deserialize;

use crate::Format;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: Option<Format>,
    pub experiment: Option<ExperimentConfig>,
    pub model: Option<ModelSection>,
    pub train: Option<TrainConfig>,
    pub data: Option<SyntheticConfig>,
    pub fit: Option<FitConfig>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub variant: Option<String>,
    pub m: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub outer_hidden: Option<Vec<usize>>,
    pub out_dim: Option<usize>,
    pub beta_param: Option<String>,
    pub upsilon: Option<f64>,
    pub tau: Option<f64>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig, String> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("malformed config {}: {e}", path.display()))
}
