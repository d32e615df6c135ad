//! Provenance record attached to every output artifact.

use std::io::Read;
use std::path::Path;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started: String,
    pub finished: Option<String>,
}

/// Everything needed to reproduce a run. Two runs with equal manifests
/// (timestamps aside) produce identical numerical output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    /// Effective configuration after flags and file were merged.
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timestamps: Option<Timestamps>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn sha256_hex<R: Read>(mut reader: R) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn new(command: impl Into<String>, seed: u64, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            tool: "quench-bench".into(),
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            seed,
            config: serde_json::to_value(config)?,
            inputs: Vec::new(),
            timestamps: Some(Timestamps { started: now(), finished: None }),
        })
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_hex(std::fs::File::open(path)?)?;
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256: digest });
        Ok(())
    }

    pub fn finish(&mut self) {
        if let Some(ts) = &mut self.timestamps {
            ts.finished = Some(now());
        }
    }

    /// Copy without timestamps, for embedding in artifacts that must be
    /// byte-identical across reruns.
    pub fn reproducible(&self) -> Self {
        Self { timestamps: None, ..self.clone() }
    }
}
