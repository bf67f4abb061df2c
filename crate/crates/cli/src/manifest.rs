use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// One reproduced number compared against its reference value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            expected,
            tolerance,
            pass: (value - expected).abs() <= tolerance,
        }
    }

    pub fn deviation(&self) -> f64 {
        (self.value - self.expected).abs()
    }
}

/// Record of one `reproduce-all` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    /// Output files, relative to the output directory.
    pub outputs: Vec<PathBuf>,
    /// SHA-256 of each output, hex encoded.
    pub checksums: BTreeMap<String, String>,
    pub checks: Vec<Check>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(command: &str, parameters: BTreeMap<String, String>, checks: Vec<Check>) -> Self {
        Self {
            command: command.into(),
            parameters,
            outputs: Vec::new(),
            checksums: BTreeMap::new(),
            checks,
        }
    }

    /// Adds `file` (relative to `dir`) with its current checksum.
    pub fn record(&mut self, dir: &Path, file: &Path) -> std::io::Result<()> {
        let bytes = fs::read(dir.join(file))?;
        self.checksums.insert(file.display().to_string(), sha256_hex(&bytes));
        self.outputs.push(file.to_path_buf());
        Ok(())
    }

    /// Files whose content no longer matches the recorded checksum.
    pub fn verify(&self, dir: &Path) -> Vec<PathBuf> {
        self.outputs
            .iter()
            .filter(|f| {
                let expected = self.checksums.get(&f.display().to_string());
                let actual = fs::read(dir.join(f)).ok().map(|b| sha256_hex(&b));
                actual.is_none() || actual.as_ref() != expected
            })
            .cloned()
            .collect()
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}
