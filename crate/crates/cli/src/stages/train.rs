use std::time::Instant;

use credfuse::baselines::{train_elastic_net, train_random_forest};
use credfuse::data::CategoryCodec;
use credfuse::eval::FeatureSubset;
use credfuse::model_io;
use credfuse::neural::{
    build_and_train_combined, fine_tune_text, pretrain_encoder, train_structured,
    CombinedModel, MlpStructuredModel, TextClassifier, TrainLog, TransformerEncoderModel,
};
use serde_json::json;

use crate::artifact;
use crate::config::ModelFamily;
use crate::error::{CliError, CliResult};
use crate::features::FeatureTable;
use crate::manifest::RunManifest;
use crate::RunContext;

use super::{cat_widths, json_bytes, load_codec, load_token_vocab, load_table, with_stage};

/// Dependency-safe execution order: the fusion model loads the structured
/// and text checkpoints from disk, so those two come first.
pub const TRAIN_ORDER: [(ModelFamily, FeatureSubset); 9] = [
    (ModelFamily::Lr, FeatureSubset::Text),
    (ModelFamily::Lr, FeatureSubset::Structured),
    (ModelFamily::Lr, FeatureSubset::Combined),
    (ModelFamily::Rf, FeatureSubset::Text),
    (ModelFamily::Rf, FeatureSubset::Structured),
    (ModelFamily::Rf, FeatureSubset::Combined),
    (ModelFamily::Dl, FeatureSubset::Structured),
    (ModelFamily::Dl, FeatureSubset::Text),
    (ModelFamily::Dl, FeatureSubset::Combined),
];

/// Train the selected (family, subset) cells on the training split.
pub fn run(
    ctx: &RunContext,
    families: &[ModelFamily],
    subsets: &[FeatureSubset],
) -> CliResult<()> {
    let selected: Vec<(ModelFamily, FeatureSubset)> = TRAIN_ORDER
        .into_iter()
        .filter(|(f, s)| families.contains(f) && subsets.contains(s))
        .collect();
    if selected.is_empty() {
        return Err(CliError::validation("the model and subset filters select nothing"));
    }
    with_stage(ctx, "train", |ctx, manifest| {
        let table = load_table(ctx, "train")?;
        let codec = load_codec(ctx)?;
        for (family, subset) in &selected {
            let start = Instant::now();
            train_one(ctx, manifest, &table, &codec, *family, *subset)?;
            let seconds = start.elapsed().as_secs_f64();
            manifest.record_stage(&format!("train-{family}-{subset}"), seconds);
            log::info!("train: {family} {subset} done in {seconds:.1}s");
        }
        Ok(())
    })
}

fn train_one(
    ctx: &RunContext,
    manifest: &mut RunManifest,
    table: &FeatureTable,
    codec: &CategoryCodec,
    family: ModelFamily,
    subset: FeatureSubset,
) -> CliResult<()> {
    let seed = ctx.stage_seed(&format!("train-{family}-{subset}"));
    let labels = &table.labels;
    match family {
        ModelFamily::Lr => {
            let x = table.matrix(subset, &cat_widths(codec))?;
            let (model, search) = train_elastic_net(&x, labels, &ctx.config.lr, seed)?;
            manifest.put(
                &ctx.out,
                &artifact::model_file(family, subset),
                model_io::model_to_string(&model)?.as_bytes(),
            )?;
            manifest.put(&ctx.out, &artifact::search_file(family, subset), &json_bytes(&search)?)?;
        }
        ModelFamily::Rf => {
            let x = table.matrix(subset, &cat_widths(codec))?;
            let (model, search) = train_random_forest(&x, labels, &ctx.config.rf, seed)?;
            manifest.put(
                &ctx.out,
                &artifact::model_file(family, subset),
                model_io::model_to_string(&model)?.as_bytes(),
            )?;
            manifest.put(&ctx.out, &artifact::search_file(family, subset), &json_bytes(&search)?)?;
        }
        ModelFamily::Dl => train_dl(ctx, manifest, table, codec, subset)?,
    }
    Ok(())
}

fn train_dl(
    ctx: &RunContext,
    manifest: &mut RunManifest,
    table: &FeatureTable,
    codec: &CategoryCodec,
    subset: FeatureSubset,
) -> CliResult<()> {
    let dl = &ctx.config.dl;
    let labels = &table.labels;
    match subset {
        FeatureSubset::Structured => {
            let cardinalities = cat_widths(codec);
            let mut model = MlpStructuredModel::new(
                &cardinalities,
                table.cont_names.len(),
                &dl.structured_hidden,
                ctx.stage_seed("init-dl-structured"),
            )?;
            let mut train_cfg = dl.structured_train.clone();
            train_cfg.seed = ctx.stage_seed("train-dl-structured");
            let log = train_structured(&mut model, &table.codes, &table.cont, labels, &train_cfg)?;
            put_dl(ctx, manifest, subset, &model.to_model_string()?)?;
            put_log(ctx, manifest, subset, json!({ "train": log.epoch_loss }))?;
        }
        FeatureSubset::Text => {
            let vocab = load_token_vocab(ctx)?;
            let seqs = table.sequences(ctx.config.text.max_len)?;
            let encoder_cfg =
                dl.encoder.to_encoder_config(vocab.table_size(), ctx.config.text.max_len);
            let mut encoder =
                TransformerEncoderModel::new(&encoder_cfg, ctx.stage_seed("init-dl-encoder"))?;
            let mut pretrain_cfg = dl.pretrain.clone();
            pretrain_cfg.seed = ctx.stage_seed("pretrain");
            let pre_log = pretrain_encoder(&mut encoder, &seqs, &pretrain_cfg)?;
            let mut finetune_cfg = dl.finetune.clone();
            finetune_cfg.seed = ctx.stage_seed("finetune");
            let (classifier, tune_log) = fine_tune_text(&encoder, &seqs, labels, &finetune_cfg)?;
            put_dl(ctx, manifest, subset, &classifier.to_model_string()?)?;
            put_log(
                ctx,
                manifest,
                subset,
                json!({ "pretrain": pre_log.epoch_loss, "finetune": tune_log.epoch_loss }),
            )?;
        }
        FeatureSubset::Combined => {
            let structured = load_dl_structured(ctx)?;
            let text = load_dl_text(ctx)?;
            let seqs = table.sequences(ctx.config.text.max_len)?;
            let (model, logs) = build_and_train_combined(
                &structured,
                &text,
                dl.head_units,
                &table.codes,
                &table.cont,
                &seqs,
                labels,
                &dl.schedule,
                ctx.stage_seed("train-dl-combined"),
            )?;
            put_dl(ctx, manifest, subset, &model.to_model_string()?)?;
            let phases: Vec<Vec<f64>> = logs.iter().map(|l: &TrainLog| l.epoch_loss.clone()).collect();
            put_log(ctx, manifest, subset, json!({ "phases": phases }))?;
        }
    }
    Ok(())
}

fn put_dl(
    ctx: &RunContext,
    manifest: &mut RunManifest,
    subset: FeatureSubset,
    model_text: &str,
) -> CliResult<()> {
    manifest.put(&ctx.out, &artifact::model_file(ModelFamily::Dl, subset), model_text.as_bytes())
}

fn put_log(
    ctx: &RunContext,
    manifest: &mut RunManifest,
    subset: FeatureSubset,
    value: serde_json::Value,
) -> CliResult<()> {
    manifest.put(&ctx.out, &artifact::train_log_file(subset), &json_bytes(&value)?)
}

pub(crate) fn load_dl_structured(ctx: &RunContext) -> CliResult<MlpStructuredModel> {
    let rel = artifact::model_file(ModelFamily::Dl, FeatureSubset::Structured);
    let text = artifact::read_required_text(&ctx.out, &rel, "train --model dl --subset structured")?;
    Ok(MlpStructuredModel::from_model_str(&text)?)
}

pub(crate) fn load_dl_text(ctx: &RunContext) -> CliResult<TextClassifier> {
    let rel = artifact::model_file(ModelFamily::Dl, FeatureSubset::Text);
    let text = artifact::read_required_text(&ctx.out, &rel, "train --model dl --subset text")?;
    Ok(TextClassifier::from_model_str(&text)?)
}

pub(crate) fn load_dl_combined(ctx: &RunContext) -> CliResult<CombinedModel> {
    let rel = artifact::model_file(ModelFamily::Dl, FeatureSubset::Combined);
    let text = artifact::read_required_text(&ctx.out, &rel, "train --model dl --subset combined")?;
    Ok(CombinedModel::from_model_str(&text)?)
}
