use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::MissingInput(path.to_path_buf()),
        _ => CliError::Io(format!("{}: {e}", path.display())),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Output directory whose files are written atomically (temporary file,
/// then rename) and recorded for the manifest.
pub struct OutDir {
    dir: PathBuf,
    written: Vec<FileDigest>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp{}", std::process::id()));
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", target.display()));
        {
            let mut f = fs::File::create(&tmp).map_err(io)?;
            f.write_all(bytes).map_err(io)?;
            f.sync_all().map_err(io)?;
        }
        fs::rename(&tmp, &target).map_err(io)?;
        self.written.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push(b'\n');
        self.write(name, &text)
    }

    /// Runs a CSV writer into memory, then writes the result atomically.
    pub fn write_with<F>(&mut self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> trunc_fpca::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    /// Writes `manifest.json` describing this run.
    pub fn finish(mut self, manifest: Manifest) -> Result<(), CliError> {
        let manifest = Manifest {
            outputs: std::mem::take(&mut self.written),
            ..manifest
        };
        self.write_json("manifest.json", &manifest)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value, seeds: serde_json::Value, inputs: Vec<FileDigest>) -> Self {
        Manifest {
            tool: "trunc-fpca",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            seeds,
            inputs,
            outputs: Vec::new(),
        }
    }
}

/// Hashes inputs up front so a missing file fails before anything is written.
/// Only file names are kept so manifests do not depend on where inputs live.
pub fn digest_inputs(paths: &[&Path]) -> Result<Vec<FileDigest>, CliError> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p
                    .file_name()
                    .map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned()),
                sha256: sha256_hex(&read_input(p)?),
            })
        })
        .collect()
}
