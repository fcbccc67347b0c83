use std::fs::File;
use std::io::{self, BufReader};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Content hash of one input file.
#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn digest(role: impl Into<String>, path: &Path) -> Result<InputDigest, CliError> {
    let file = File::open(path).map_err(|e| CliError::read(path, e))?;
    let mut hasher = Sha256::new();
    let bytes = io::copy(&mut BufReader::new(file), &mut hasher).map_err(|e| CliError::read(path, e))?;
    Ok(InputDigest {
        role: role.into(),
        path: path.display().to_string(),
        sha256: hex::encode(hasher.finalize()),
        bytes,
    })
}

/// Everything needed to repeat a run: resolved settings, input digests and
/// seeds. Deliberately free of timestamps and host details.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub settings: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub seeds: Vec<u64>,
}

impl RunManifest {
    pub fn new(command: &'static str, settings: impl Serialize, inputs: Vec<InputDigest>, seeds: Vec<u64>) -> Result<Self, CliError> {
        Ok(Self {
            tool: "posasc",
            version: env!("CARGO_PKG_VERSION"),
            command,
            settings: serde_json::to_value(settings).map_err(|e| CliError::Runtime(e.to_string()))?,
            inputs,
            seeds,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        crate::commands::write_file(path, text.as_bytes())
    }
}
