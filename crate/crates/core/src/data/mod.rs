//! Dataset schema, persistence, splitting and synthetic generation.

pub mod codec;
pub mod io;
pub mod schema;
pub mod split;
pub mod synth;
pub mod wordbank;

pub use codec::{apply_scaler, fit_codec, fit_scaler, CategoryCodec, ScalerParams, UNK_CATEGORY};
pub use io::{load_dataset, write_dataset};
pub use schema::{Dataset, FeatureSchema, LoanRecord, Segment};
pub use split::{split_dataset, DataSplits};
pub use synth::{generate_synthetic, structured_score, synthetic_schema, SynthConfig};
