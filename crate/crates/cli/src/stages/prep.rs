use credfuse::data::{
    fit_codec, fit_scaler, load_dataset, split_dataset, synthetic_schema,
};
use credfuse::text::{fit_lsa, fit_tfidf, tokenize, TokenVocab, Vocabulary};

use crate::artifact;
use crate::error::{CliError, CliResult};
use crate::features::FeatureTable;
use crate::RunContext;

use super::{json_bytes, load_stopwords, with_stage};

/// Fit every transform on the training split only, then encode all four
/// parts. Downstream stages read the encoded tables, never the raw data.
pub fn run(ctx: &RunContext) -> CliResult<()> {
    with_stage(ctx, "prep", |ctx, manifest| {
        let dataset_path = ctx.path(artifact::DATASET);
        if !dataset_path.is_file() {
            return Err(CliError::missing(artifact::DATASET, "synth"));
        }
        let dataset = load_dataset(&dataset_path, &synthetic_schema())?;
        let splits =
            split_dataset(&dataset, ctx.config.split.holdout_ratio, ctx.stage_seed("split"))?;

        let scaler = fit_scaler(&dataset, &splits.train)?;
        let codec = fit_codec(&dataset, &splits.train)?;

        let text_cfg = &ctx.config.text;
        let stopwords = load_stopwords(text_cfg)?;
        let train_docs: Vec<Vec<String>> = splits
            .train
            .iter()
            .map(|&i| tokenize(&dataset.records[i].text))
            .collect();
        let vocabulary =
            Vocabulary::build(&train_docs, text_cfg.min_df, text_cfg.max_df, &stopwords)?;
        let tfidf = fit_tfidf(&train_docs, vocabulary)?;
        let lsa = fit_lsa(&train_docs, tfidf, text_cfg.variance_target, text_cfg.k_max)?;
        let token_vocab = TokenVocab::fit(&train_docs, text_cfg.min_count)?;

        manifest.put(&ctx.out, artifact::SCALER, &json_bytes(&scaler)?)?;
        manifest.put(&ctx.out, artifact::CODEC, &json_bytes(&codec)?)?;
        manifest.put(&ctx.out, artifact::LSA, &json_bytes(&lsa)?)?;
        manifest.put(&ctx.out, artifact::TOKEN_VOCAB, &json_bytes(&token_vocab)?)?;

        for (part, idx) in splits.all_parts() {
            let table = FeatureTable::build(
                &dataset,
                idx,
                &scaler,
                &codec,
                &lsa,
                &token_vocab,
                text_cfg.max_len,
            )?;
            manifest.put(&ctx.out, &artifact::features_csv(part), &table.to_csv_bytes()?)?;
            log::info!("prep: {part} split encoded with {} rows", table.n_rows());
        }

        log::info!(
            "prep: {} concept terms, {} concepts, {} embedding tokens",
            lsa.tfidf.vocabulary.len(),
            lsa.lsa.k,
            token_vocab.n_words()
        );
        Ok(())
    })
}
