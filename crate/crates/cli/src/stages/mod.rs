//! Pipeline stages. Each one locks the run directory, loads or starts the
//! manifest, does its work through `RunManifest::put` and saves the manifest
//! with its wall-clock recorded.

pub mod evaluate;
pub mod explain;
pub mod prep;
pub mod report;
pub mod synth;
pub mod train;

use std::collections::BTreeSet;
use std::time::Instant;

use credfuse::data::CategoryCodec;
use credfuse::text::{default_stopwords, TokenVocab};
use serde::Serialize;

use crate::artifact::{self, read_required_text, RunLock};
use crate::config::TextConfig;
use crate::error::{CliError, CliResult};
use crate::features::FeatureTable;
use crate::manifest::RunManifest;
use crate::RunContext;

pub(crate) fn with_stage<F>(ctx: &RunContext, stage: &str, body: F) -> CliResult<()>
where
    F: FnOnce(&RunContext, &mut RunManifest) -> CliResult<()>,
{
    let _lock = RunLock::acquire(&ctx.out)?;
    let mut manifest = RunManifest::load_or_new(&ctx.out, &ctx.config.config_hash())?;
    let start = Instant::now();
    body(ctx, &mut manifest)?;
    manifest.record_stage(stage, start.elapsed().as_secs_f64());
    manifest.save(&ctx.out)
}

/// Compact JSON bytes for numeric payloads.
pub(crate) fn json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut text = serde_json::to_string(value).map_err(credfuse::Error::from)?;
    text.push('\n');
    Ok(text.into_bytes())
}

pub(crate) fn from_json<T: serde::de::DeserializeOwned>(rel: &str, text: &str) -> CliResult<T> {
    serde_json::from_str(text)
        .map_err(|e| CliError::validation(format!("artifact {rel} is not valid: {e}")))
}

pub(crate) fn load_table(ctx: &RunContext, part: &str) -> CliResult<FeatureTable> {
    let rel = artifact::features_csv(part);
    let bytes = crate::artifact::read_required(&ctx.out, &rel, "prep")?;
    FeatureTable::from_csv_bytes(&bytes)
}

pub(crate) fn load_codec(ctx: &RunContext) -> CliResult<CategoryCodec> {
    let text = read_required_text(&ctx.out, artifact::CODEC, "prep")?;
    from_json(artifact::CODEC, &text)
}

pub(crate) fn load_token_vocab(ctx: &RunContext) -> CliResult<TokenVocab> {
    let text = read_required_text(&ctx.out, artifact::TOKEN_VOCAB, "prep")?;
    from_json(artifact::TOKEN_VOCAB, &text)
}

pub(crate) fn cat_widths(codec: &CategoryCodec) -> Vec<usize> {
    codec.maps.iter().map(|m| m.n_indices()).collect()
}

/// The configured stopword list, or the built-in one.
pub(crate) fn load_stopwords(text: &TextConfig) -> CliResult<BTreeSet<String>> {
    match &text.stopword_file {
        None => Ok(default_stopwords()),
        Some(path) => {
            let raw = std::fs::read_to_string(path).map_err(|e| {
                CliError::validation(format!("cannot read {}: {e}", path.display()))
            })?;
            Ok(raw
                .lines()
                .map(|line| line.trim().to_lowercase())
                .filter(|line| !line.is_empty())
                .collect())
        }
    }
}
