use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::config::IConvConfig;
use crate::model::params::ModelParams;

pub const CHECKPOINT_FORMAT: u32 = 1;

/// Self-describing model container: architecture config, every parameter
/// tensor (shape-tagged through the matrix types, 64-bit), the RNG seed the
/// run started from, and free-form run metadata. Serialization is plain JSON
/// with a fixed field order and an ordered metadata map, so a fixed seed
/// produces byte-identical files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub config: IConvConfig,
    pub seed: u64,
    pub metadata: BTreeMap<String, String>,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn new(config: IConvConfig, params: ModelParams, seed: u64) -> Self {
        Checkpoint { format: CHECKPOINT_FORMAT, config, seed, metadata: BTreeMap::new(), params }
    }

    pub fn with_metadata(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        serde_json::to_vec(self)
            .map_err(|e| Error::Parse(format!("checkpoint serialization failed: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("cannot read checkpoint {}: {e}", path.display()),
            ))
        })?;
        let ckpt: Checkpoint = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Parse(format!("malformed checkpoint {}: {e}", path.display())))?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Config(format!(
                "checkpoint format {} unsupported (expected {CHECKPOINT_FORMAT})",
                ckpt.format
            )));
        }
        ckpt.config.validate()?;
        Ok(ckpt)
    }
}
