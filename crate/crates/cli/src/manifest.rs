use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    pub started_unix: u64,
    pub wall_clock_secs: f64,
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    clock: Instant,
}

impl ManifestBuilder {
    pub fn start(command: &str, config: impl Serialize, seed: u64) -> Self {
        ManifestBuilder {
            manifest: RunManifest {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
                seed,
                inputs: Vec::new(),
                outputs: Vec::new(),
                started_unix: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
                wall_clock_secs: 0.0,
            },
            clock: Instant::now(),
        }
    }

    /// Reads `path`, records its digest and returns the bytes.
    pub fn input(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let digest = Sha256::digest(&bytes);
        self.manifest.inputs.push(InputDigest {
            path: path.to_path_buf(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        });
        Ok(bytes)
    }

    pub fn output(&mut self, path: &Path, contents: &[u8]) -> Result<(), CliError> {
        write_file(path, contents)?;
        self.manifest.outputs.push(path.to_path_buf());
        Ok(())
    }

    pub fn finish(mut self, path: &Path) -> Result<(), CliError> {
        self.manifest.wall_clock_secs = self.clock.elapsed().as_secs_f64();
        let json = serde_json::to_vec_pretty(&self.manifest).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        write_file(path, &json)?;
        log::info!("manifest written to {}", path.display());
        Ok(())
    }
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `dir/stem.suffix` for an output `dir/stem.ext`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    path.with_file_name(format!("{stem}.{suffix}"))
}
