//! Versioned JSON checkpoint: configs plus flat parameter arrays.
//!
//! Floats are written in shortest round-trip form, so a save/load cycle is
//! bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::series::WindowSpec;

use super::model::ModelParams;

pub const FORMAT: &str = "tfad-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub window: WindowSpec,
    /// Window-score threshold selected on validation data.
    pub threshold: f64,
    pub loss_trace: Vec<f64>,
    pub model: ModelParams,
}

impl Checkpoint {
    pub fn new(model: ModelParams, window: WindowSpec, threshold: f64, loss_trace: Vec<f64>) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            window,
            threshold,
            loss_trace,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.format != FORMAT {
            return Err(Error::Checkpoint(format!("unexpected format tag `{}`", ck.format)));
        }
        if ck.version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        ck.model.config.validate()?;
        let expected = ck.model.config.encoder_config().param_count()
            * ck.model.config.branches.enabled().count()
            + 5;
        if ck.model.param_count() != expected {
            return Err(Error::Checkpoint(format!(
                "parameter count {} does not match configuration ({expected})",
                ck.model.param_count()
            )));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
