use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::{self, sha256_hex, write_atomic};
use crate::error::{CliError, CliResult};

pub const MANIFEST_FORMAT: &str = "credfuse-run";

/// Ledger of one run directory: which config produced it, every artifact
/// with its content hash, and per-stage wall-clock. Artifact hashes are a
/// pure function of the config and build; wall-clock is informational.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    /// Library version that wrote the artifacts.
    pub version: String,
    /// Hash of the effective config (output location excluded).
    pub config_hash: String,
    /// Relative artifact path to "sha256:..." content hash.
    pub artifacts: BTreeMap<String, String>,
    /// Stage name to wall-clock seconds of its latest run.
    pub stage_seconds: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(config_hash: &str) -> Self {
        RunManifest {
            format: MANIFEST_FORMAT.to_string(),
            version: credfuse::VERSION.to_string(),
            config_hash: config_hash.to_string(),
            artifacts: BTreeMap::new(),
            stage_seconds: BTreeMap::new(),
        }
    }

    /// Load the directory's manifest, or start a fresh one. A manifest from a
    /// different config refuses to mix: such artifacts would be stale.
    pub fn load_or_new(out_dir: &Path, config_hash: &str) -> CliResult<Self> {
        let path = out_dir.join(artifact::MANIFEST);
        if !path.is_file() {
            return Ok(RunManifest::new(config_hash));
        }
        let text = std::fs::read_to_string(&path)?;
        let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| {
            CliError::validation(format!("{} is not a valid run manifest: {e}", path.display()))
        })?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(CliError::validation(format!(
                "{} has format {:?}, expected {MANIFEST_FORMAT:?}",
                path.display(),
                manifest.format
            )));
        }
        if manifest.config_hash != config_hash {
            return Err(CliError::validation(format!(
                "artifacts in {} were produced by a different config \
                 (manifest hash {}, current config {}); use a fresh output \
                 directory or delete the stale artifacts",
                out_dir.display(),
                manifest.config_hash,
                config_hash
            )));
        }
        Ok(manifest)
    }

    /// Write an artifact atomically and record its content hash.
    pub fn put(&mut self, out_dir: &Path, rel: &str, bytes: &[u8]) -> CliResult<()> {
        write_atomic(&out_dir.join(rel), bytes)?;
        self.artifacts.insert(rel.to_string(), format!("sha256:{}", sha256_hex(bytes)));
        Ok(())
    }

    pub fn record_stage(&mut self, stage: &str, seconds: f64) {
        self.stage_seconds.insert(stage.to_string(), seconds);
    }

    pub fn save(&self, out_dir: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(credfuse::Error::from)?;
        text.push('\n');
        write_atomic(&out_dir.join(artifact::MANIFEST), text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = RunManifest::new("cafe");
        manifest.put(dir.path(), "data/x.txt", b"hello").unwrap();
        manifest.record_stage("synth", 0.25);
        manifest.save(dir.path()).unwrap();

        let back = RunManifest::load_or_new(dir.path(), "cafe").unwrap();
        assert_eq!(back, manifest);
        assert_eq!(
            back.artifacts["data/x.txt"],
            format!("sha256:{}", sha256_hex(b"hello"))
        );
    }

    #[test]
    fn fresh_directory_starts_empty() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = RunManifest::load_or_new(dir.path(), "beef").unwrap();
        assert!(manifest.artifacts.is_empty());
        assert_eq!(manifest.version, credfuse::VERSION);
    }

    #[test]
    fn different_config_hash_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        RunManifest::new("aaaa").save(dir.path()).unwrap();
        let err = RunManifest::load_or_new(dir.path(), "bbbb").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("different config"));
    }

    #[test]
    fn rewriting_identical_bytes_keeps_the_hash() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = RunManifest::new("cafe");
        manifest.put(dir.path(), "a.bin", b"same").unwrap();
        let first = manifest.artifacts["a.bin"].clone();
        manifest.put(dir.path(), "a.bin", b"same").unwrap();
        assert_eq!(manifest.artifacts["a.bin"], first);
    }
}
