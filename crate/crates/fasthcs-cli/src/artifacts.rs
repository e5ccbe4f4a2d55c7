//! Output plumbing shared by all commands: atomic file writes, checksums,
//! and the run manifest that records what was produced and with which knobs.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::commands::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Record of one command invocation, written alongside its outputs. The
/// checksums cover every other emitted file, so the manifest goes last.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub inputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_over_n: Option<f64>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(rename = "W", skip_serializing_if = "Option::is_none")]
    pub w: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_directions: Option<usize>,
    pub out_dir: String,
    pub checksums: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &'static str, inputs: &[&Path], out_dir: &Path) -> Self {
        RunManifest {
            command,
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            q: None,
            seed: None,
            e_over_n: None,
            k: None,
            w: None,
            n_directions: None,
            out_dir: out_dir.display().to_string(),
            checksums: BTreeMap::new(),
        }
    }
}

/// Writes files into one directory, each atomically (temp then rename), and
/// accumulates their checksums for the closing manifest.
pub struct OutputDir {
    dir: PathBuf,
    checksums: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
        Ok(OutputDir { dir: dir.to_path_buf(), checksums: BTreeMap::new() })
    }

    fn write_atomic(&self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let tmp = self.dir.join(format!("{name}.tmp"));
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, self.dir.join(name))
    }

    pub fn emit(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        self.write_atomic(name, content.as_bytes())
            .map_err(|e| CliError::input(format!("{}/{name}: {e}", self.dir.display())))?;
        self.checksums.insert(name.to_string(), sha256_hex(content.as_bytes()));
        Ok(())
    }

    /// Attach the collected checksums and write the manifest itself.
    pub fn finish(self, mut manifest: RunManifest) -> Result<(), CliError> {
        manifest.checksums = self.checksums.clone();
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::input(format!("manifest: {e}")))? + "\n";
        self.write_atomic("manifest.json", json.as_bytes())
            .map_err(|e| CliError::input(format!("{}/manifest.json: {e}", self.dir.display())))
    }
}
