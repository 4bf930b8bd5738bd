//! The run report shared by every subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Success,
    VerificationFailure,
    InputError,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::VerificationFailure => 1,
            Status::InputError => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &Path) -> std::io::Result<Self> {
        let bytes = fs::read(path)?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

/// Contains nothing time- or machine-dependent, so reruns with the same
/// inputs and seed produce byte-identical files.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub command: String,
    pub arguments: Value,
    pub inputs: Vec<InputDigest>,
    pub result: Value,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    pub status: Status,
    pub exit_code: u8,
}

impl RunReport {
    pub fn new(command: &str, arguments: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            arguments,
            inputs: Vec::new(),
            result: Value::Null,
            warnings: Vec::new(),
            error: None,
            status: Status::Success,
            exit_code: 0,
        }
    }

    pub fn finish(&mut self, status: Status) {
        self.status = status;
        self.exit_code = status.exit_code();
    }

    pub fn path_in(dir: &Path, command: &str) -> PathBuf {
        dir.join(format!("{command}.report.json"))
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = Self::path_in(dir, &self.command);
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}
