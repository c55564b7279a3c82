//! JSON checkpoints: format tag, version, the full model config and every
//! parameter array by name. Floats are written in shortest round-trip form,
//! so save → load → save is byte-identical.

use std::path::Path;

use lipgen_core::model::{ModelConfig, ModelState};
use lipgen_core::NumericArray;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

pub const CHECKPOINT_FORMAT: &str = "lipgen-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedArray {
    name: String,
    value: NumericArray,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    version: u32,
    config: ModelConfig,
    parameters: Vec<NamedArray>,
}

pub fn checkpoint_bytes(state: &ModelState, config: &ModelConfig) -> Vec<u8> {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        config: config.clone(),
        parameters: state
            .parameters
            .iter()
            .map(|p| NamedArray {
                name: p.name.clone(),
                value: p.value.clone(),
            })
            .collect(),
    };
    io::to_json_bytes(&file)
}

pub fn save_checkpoint(path: &Path, state: &ModelState, config: &ModelConfig) -> Result<()> {
    io::write_atomic(path, &checkpoint_bytes(state, config))
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelState, ModelConfig)> {
    let file: CheckpointFile = io::read_json(path)?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(Error::format(path, format!("not a checkpoint (format `{}`)", file.format)));
    }
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::format(
            path,
            format!("checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})", file.version),
        ));
    }
    file.config.validate().map_err(|e| Error::format(path, e))?;
    let named = file.parameters.into_iter().map(|p| (p.name, p.value)).collect();
    let state = ModelState::from_parameters(&file.config, named).map_err(|e| Error::format(path, e))?;
    Ok((state, file.config))
}
