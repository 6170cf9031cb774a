//! Resume-capable snapshots of a [`BalanceRun`] as JSON.

use super::BalanceRun;
use std::path::Path;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Format(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Envelope<T> {
    version: u32,
    run: T,
}

pub fn to_string(run: &BalanceRun) -> Result<String, CheckpointError> {
    Ok(serde_json::to_string_pretty(&Envelope {
        version: FORMAT_VERSION,
        run,
    })?)
}

pub fn from_str(text: &str) -> Result<BalanceRun, CheckpointError> {
    let env: Envelope<serde_json::Value> = serde_json::from_str(text)?;
    if env.version != FORMAT_VERSION {
        return Err(CheckpointError::Version(env.version));
    }
    Ok(serde_json::from_value(env.run)?)
}

pub fn save(run: &BalanceRun, path: &Path) -> Result<(), CheckpointError> {
    crate::fsutil::write_atomic(path, to_string(run)?.as_bytes())?;
    Ok(())
}

pub fn load(path: &Path) -> Result<BalanceRun, CheckpointError> {
    from_str(&std::fs::read_to_string(path)?)
}
