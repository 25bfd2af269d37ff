use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use credfuse::eval::FeatureSubset;

use crate::config::ModelFamily;
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";
pub const LOCK: &str = "run.lock";

pub const DATASET: &str = "data/dataset.csv";
pub const SCALER: &str = "prep/scaler.json";
pub const CODEC: &str = "prep/codec.json";
pub const LSA: &str = "prep/lsa.json";
pub const TOKEN_VOCAB: &str = "prep/token_vocab.json";
pub const GRID_JSON: &str = "eval/grid.json";
pub const GRID_CSV: &str = "eval/grid.csv";
pub const CORRELATIONS_CSV: &str = "eval/correlations.csv";
pub const IMPORTANCE_STRUCTURED_JSON: &str = "explain/importance_structured.json";
pub const IMPORTANCE_STRUCTURED_CSV: &str = "explain/importance_structured.csv";
pub const IMPORTANCE_COMBINED_JSON: &str = "explain/importance_combined.json";
pub const IMPORTANCE_COMBINED_CSV: &str = "explain/importance_combined.csv";
pub const IMPORTANCE_SHIFT_CSV: &str = "explain/importance_shift.csv";
pub const UNCERTAIN_CSV: &str = "explain/uncertain_cases.csv";
pub const LIME_CASES_CSV: &str = "explain/lime_cases.csv";
pub const LIME_WORDS_CSV: &str = "explain/lime_words.csv";
pub const TOP_WORDS_CSV: &str = "explain/top_words.csv";
pub const REPORT_MD: &str = "report/report.md";

/// Names of the four split parts, in pipeline order.
pub const PARTS: [&str; 4] = ["train", "holdout", "oot_early", "oot_late"];

pub fn features_csv(part: &str) -> String {
    format!("prep/features_{part}.csv")
}

pub fn model_file(family: ModelFamily, subset: FeatureSubset) -> String {
    format!("models/{}_{}.json", family.as_str(), subset.as_str())
}

pub fn search_file(family: ModelFamily, subset: FeatureSubset) -> String {
    format!("models/search_{}_{}.json", family.as_str(), subset.as_str())
}

pub fn train_log_file(subset: FeatureSubset) -> String {
    format!("models/log_dl_{}.json", subset.as_str())
}

pub fn predictions_csv(family: ModelFamily, subset: FeatureSubset, part: &str) -> String {
    format!("eval/predictions_{}_{}_{part}.csv", family.as_str(), subset.as_str())
}

pub fn wordcount_csv(family: ModelFamily) -> String {
    format!("eval/wordcount_{}_text.csv", family.as_str())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// Write through a temp file in the same directory, then rename into place.
/// Readers never observe a half-written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = parent {
        fs::create_dir_all(dir)?;
    }
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| CliError::validation(format!("bad artifact path {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Read a required artifact; a missing file names the producing command.
pub fn read_required(out_dir: &Path, rel: &str, producer: &str) -> CliResult<Vec<u8>> {
    let path = out_dir.join(rel);
    if !path.is_file() {
        return Err(CliError::missing(rel, producer));
    }
    Ok(fs::read(&path)?)
}

pub fn read_required_text(out_dir: &Path, rel: &str, producer: &str) -> CliResult<String> {
    let bytes = read_required(out_dir, rel, producer)?;
    String::from_utf8(bytes)
        .map_err(|_| CliError::validation(format!("artifact {rel} is not valid text")))
}

/// Exclusive-creation lock file guarding a run directory against concurrent
/// writers. Removed on drop.
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(out_dir: &Path) -> CliResult<RunLock> {
        fs::create_dir_all(out_dir)?;
        let path = out_dir.join(LOCK);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut file) => {
                let _ = writeln!(file, "{}", std::process::id());
                Ok(RunLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(CliError::validation(format!(
                    "{} exists: another run is writing to this directory \
                     (remove the file if that run is gone)",
                    path.display()
                )))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_matches_known_vector() {
        // Standard test vector for the empty input.
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn atomic_write_creates_parents_and_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b/file.txt");
        write_atomic(&path, b"one").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"one");
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        // No temp residue.
        let names: Vec<_> = fs::read_dir(path.parent().unwrap())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn missing_artifact_reports_producer_and_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let err = read_required(dir.path(), "models/lr_text.json", "train").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("credfuse train"));
    }

    #[test]
    fn lock_excludes_second_writer_and_releases_on_drop() {
        let dir = tempfile::tempdir().unwrap();
        let lock = RunLock::acquire(dir.path()).unwrap();
        assert!(RunLock::acquire(dir.path()).is_err());
        drop(lock);
        let again = RunLock::acquire(dir.path()).unwrap();
        drop(again);
        assert!(!dir.path().join(LOCK).exists());
    }

    #[test]
    fn artifact_names_are_stable() {
        assert_eq!(model_file(ModelFamily::Dl, FeatureSubset::Combined), "models/dl_combined.json");
        assert_eq!(
            predictions_csv(ModelFamily::Lr, FeatureSubset::Text, "holdout"),
            "eval/predictions_lr_text_holdout.csv"
        );
        assert_eq!(features_csv("oot_late"), "prep/features_oot_late.csv");
        assert_eq!(wordcount_csv(ModelFamily::Rf), "eval/wordcount_rf_text.csv");
    }
}
