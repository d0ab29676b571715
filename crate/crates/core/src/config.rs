//! Pipeline configuration, read from and written to TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::decompose::DEFAULT_LAMBDA;
use crate::error::{Error, Result};
use crate::nn::{BranchSet, ModelConfig, TcnConfig, TrainConfig};
use crate::series::WindowSpec;

/// Optional file locations; command-line arguments take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// HP multiplier.
    pub lambda: f64,
    /// False feeds the normalized window to the residual branches and zeros
    /// to the trend branches.
    pub decompose: bool,
    /// Window stride used when cutting training pairs.
    pub train_stride: usize,
    pub window: WindowSpec,
    /// `in_channels` is overridden by the data dimensionality.
    pub encoder: TcnConfig,
    pub branches: BranchSet,
    pub train: TrainConfig,
    pub augment: AugmentConfig,
    pub paths: Paths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            decompose: true,
            train_stride: 4,
            window: WindowSpec::default(),
            encoder: TcnConfig::default(),
            branches: BranchSet::all(),
            train: TrainConfig::default(),
            augment: AugmentConfig::default(),
            paths: Paths::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.branches.is_empty() {
            return Err(Error::InvalidConfig("at least one branch must be enabled".into()));
        }
        if self.train_stride == 0 {
            return Err(Error::InvalidConfig("train_stride must be positive".into()));
        }
        self.window.validate()?;
        self.train.validate()?;
        self.augment.validate()?;
        self.model_config(self.encoder.in_channels.max(1)).validate()
    }

    pub fn model_config(&self, dims: usize) -> ModelConfig {
        ModelConfig {
            dims,
            encoder: TcnConfig {
                in_channels: dims,
                ..self.encoder
            },
            branches: self.branches,
            decompose: self.decompose,
            lambda: self.lambda,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}
