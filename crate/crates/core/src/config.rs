//! TOML-loadable configuration shared by the library and the CLI.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blr::TrainConfig;
use crate::error::{Error, Result};
use crate::protocol::ProtocolConfig;
use crate::signal::PreprocessConfig;
use crate::sim::ProfileDistribution;

/// Preprocessing plus classifier settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub classifier: TrainConfig,
}

/// Everything a run can override from a config file. Missing sections and
/// keys keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub fs: f64,
    pub protocol: ProtocolConfig,
    pub pipeline: PipelineConfig,
    pub subjects: ProfileDistribution,
    /// Points in the default confidence-threshold grid.
    pub sweep_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            fs: 1024.0,
            protocol: ProtocolConfig::default(),
            pipeline: PipelineConfig::default(),
            subjects: ProfileDistribution::default(),
            sweep_points: 41,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}
