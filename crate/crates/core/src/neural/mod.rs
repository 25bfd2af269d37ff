//! Small neural models: an entity-embedding MLP for structured data, a
//! transformer text encoder with masked-token pretraining, and a fusion
//! model joining both tails under one head.
//!
//! All parameters live in a flat named block store, every forward/backward
//! pair is verified by finite differences, and training is deterministic
//! for a given seed regardless of thread count.

mod attention;
mod combined;
mod encoder;
mod gradcheck;
mod layers;
mod ops;
mod store;
mod structured;
mod trainer;

pub use combined::{
    build_and_train_combined, train_combined, train_combined_with, CombinedModel, TrainPhase,
    TrainSchedule,
};
pub use encoder::{
    fine_tune_text, pretrain_encoder, EncoderConfig, FineTuneConfig, PretrainConfig,
    TextClassifier, TransformerEncoderModel,
};
pub use gradcheck::{layer_gradcheck_suite, GradCheckReport, DEFAULT_EPS};
pub use store::{BlockId, Gradients, ParamBlock, ParamStore};
pub use structured::{
    embedding_size, train_structured, MlpStructuredModel, StructuredTrainConfig,
};
pub use trainer::TrainLog;
