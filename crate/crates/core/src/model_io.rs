//! Portable on-disk format for fitted models.
//!
//! Every model file is a JSON envelope: a header with format name, version,
//! model kind, and principal dimensions, then the full parameter payload.
//! Floats are written in shortest round-trip form, so save/load is bit-exact.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "credfuse-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Implemented by every serializable fitted model.
pub trait ModelKind: Serialize + DeserializeOwned {
    /// Stable identifier written to the file header.
    const KIND: &'static str;
    /// Principal dimensions (e.g. vocabulary size, component count) for the
    /// header; purely informational.
    fn dims(&self) -> Vec<usize>;
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    kind: String,
    dims: Vec<usize>,
    payload: T,
}

/// Serialize a model to the envelope JSON string.
pub fn model_to_string<T: ModelKind>(model: &T) -> Result<String> {
    let envelope = Envelope {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_FORMAT_VERSION,
        kind: T::KIND.to_string(),
        dims: model.dims(),
        payload: model,
    };
    serde_json::to_string_pretty(&envelope)
        .map_err(|e| Error::format(format!("model serialization failed: {e}")))
}

/// Parse a model from envelope JSON, checking format, version, and kind.
pub fn model_from_str<T: ModelKind>(text: &str) -> Result<T> {
    let envelope: Envelope<T> = serde_json::from_str(text)
        .map_err(|e| Error::format(format!("model file is not valid: {e}")))?;
    if envelope.format != MODEL_FORMAT {
        return Err(Error::format(format!(
            "unrecognized model format {:?}",
            envelope.format
        )));
    }
    if envelope.version != MODEL_FORMAT_VERSION {
        return Err(Error::format(format!(
            "model format version {} unsupported (expected {MODEL_FORMAT_VERSION})",
            envelope.version
        )));
    }
    if envelope.kind != T::KIND {
        return Err(Error::format(format!(
            "model kind {:?} does not match expected {:?}",
            envelope.kind,
            T::KIND
        )));
    }
    Ok(envelope.payload)
}

pub fn save_model<T: ModelKind>(path: &Path, model: &T) -> Result<()> {
    let text = model_to_string(model)?;
    fs::write(path, text).map_err(Error::from)
}

pub fn load_model<T: ModelKind>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::from)?;
    model_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Toy {
        weights: Vec<f64>,
    }

    impl ModelKind for Toy {
        const KIND: &'static str = "toy";
        fn dims(&self) -> Vec<usize> {
            vec![self.weights.len()]
        }
    }

    #[derive(Serialize, Deserialize)]
    struct Other {
        weights: Vec<f64>,
    }

    impl ModelKind for Other {
        const KIND: &'static str = "other";
        fn dims(&self) -> Vec<usize> {
            vec![]
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let toy = Toy {
            weights: vec![0.1 + 0.2, 1.0 / 3.0, f64::MIN_POSITIVE, -1e300, 0.0],
        };
        let text = model_to_string(&toy).unwrap();
        let back: Toy = model_from_str(&text).unwrap();
        for (a, b) in toy.weights.iter().zip(&back.weights) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn header_carries_kind_and_dims() {
        let toy = Toy { weights: vec![1.0, 2.0, 3.0] };
        let text = model_to_string(&toy).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["format"], MODEL_FORMAT);
        assert_eq!(value["version"], MODEL_FORMAT_VERSION);
        assert_eq!(value["kind"], "toy");
        assert_eq!(value["dims"][0], 3);
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let other = Other { weights: vec![1.0] };
        let text = model_to_string(&other).unwrap();
        assert!(model_from_str::<Toy>(&text).is_err());
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let toy = Toy { weights: vec![1.0] };
        let text = model_to_string(&toy).unwrap().replace("\"version\": 1", "\"version\": 99");
        assert!(model_from_str::<Toy>(&text).is_err());
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(model_from_str::<Toy>("{not json").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.json");
        let toy = Toy { weights: vec![0.5, -0.25] };
        save_model(&path, &toy).unwrap();
        let back: Toy = load_model(&path).unwrap();
        assert_eq!(toy, back);
    }
}
