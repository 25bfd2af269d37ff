use std::collections::BTreeMap;

use credfuse::data::{load_dataset, synthetic_schema, LoanRecord};
use credfuse::eval::FeatureSubset;
use credfuse::explain::{
    aggregate_word_importance, importance_shift, lime_text, permutation_importance,
    select_uncertain_improved, ColumnData, LimeConfig, LimeExplanation, PermutationColumn,
    PermutationImportanceReport, TEXT_FEATURE_LABEL,
};
use credfuse::text::{encode_for_transformer, stem, TokenSequence};

use crate::artifact::{self, read_required};
use crate::config::ModelFamily;
use crate::error::{CliError, CliResult};
use crate::RunContext;

use super::evaluate::predictions_from_csv;
use super::train::{load_dl_combined, load_dl_structured, load_dl_text};
use super::{json_bytes, load_stopwords, load_table, load_token_vocab, with_stage};

/// Post-hoc explanation of the neural models on the holdout split:
/// permutation importance for the structured-only and fusion models, the
/// importance shift between them, uncertain improved cases, and word-level
/// attributions for the text model on those cases.
pub fn run(ctx: &RunContext) -> CliResult<()> {
    with_stage(ctx, "explain", |ctx, manifest| {
        let table = load_table(ctx, "holdout")?;
        let vocab = load_token_vocab(ctx)?;
        let max_len = ctx.config.text.max_len;
        let seqs = table.sequences(max_len)?;
        let mlp = load_dl_structured(ctx)?;
        let combined = load_dl_combined(ctx)?;
        let classifier = load_dl_text(ctx)?;

        let n_cont = table.cont_names.len();
        let n_cat = table.cat_names.len();
        let mut columns: Vec<PermutationColumn> = Vec::new();
        for (j, name) in table.cont_names.iter().enumerate() {
            let values: Vec<f64> = table.cont.iter().map(|row| row[j]).collect();
            columns.push(PermutationColumn::new(name.clone(), ColumnData::Values(values)));
        }
        for (j, name) in table.cat_names.iter().enumerate() {
            let codes: Vec<usize> = table.codes.iter().map(|row| row[j]).collect();
            columns.push(PermutationColumn::new(name.clone(), ColumnData::Codes(codes)));
        }

        let repeats = ctx.config.explain.permutation_repeats;
        let score_structured = |cols: &[ColumnData]| {
            let (cont, codes, _) = rebuild_columns(cols, n_cont, n_cat)?;
            mlp.predict(&codes, &cont)
        };
        let base_report = permutation_importance(
            score_structured,
            &columns,
            &table.labels,
            repeats,
            ctx.stage_seed("explain-perm-structured"),
        )?;
        manifest.put(&ctx.out, artifact::IMPORTANCE_STRUCTURED_JSON, &json_bytes(&base_report)?)?;
        manifest.put(
            &ctx.out,
            artifact::IMPORTANCE_STRUCTURED_CSV,
            &importance_csv(&base_report)?,
        )?;

        let mut combined_columns = columns;
        combined_columns.push(PermutationColumn::new(
            TEXT_FEATURE_LABEL.to_string(),
            ColumnData::Docs(seqs.clone()),
        ));
        let score_combined = |cols: &[ColumnData]| {
            let (cont, codes, docs) = rebuild_columns(cols, n_cont, n_cat)?;
            let docs = docs.ok_or_else(|| {
                credfuse::Error::validation("the fusion scorer needs the document column")
            })?;
            combined.predict(&codes, &cont, docs)
        };
        let combined_report = permutation_importance(
            score_combined,
            &combined_columns,
            &table.labels,
            repeats,
            ctx.stage_seed("explain-perm-combined"),
        )?;
        manifest.put(&ctx.out, artifact::IMPORTANCE_COMBINED_JSON, &json_bytes(&combined_report)?)?;
        manifest.put(
            &ctx.out,
            artifact::IMPORTANCE_COMBINED_CSV,
            &importance_csv(&combined_report)?,
        )?;

        let shift = importance_shift(&base_report, &combined_report)?;
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["name", "baseline_drop", "combined_drop", "delta"])
            .map_err(credfuse::Error::from)?;
        for row in &shift.rows {
            writer
                .write_record([
                    row.name.clone(),
                    row.baseline.to_string(),
                    row.combined.to_string(),
                    row.delta.to_string(),
                ])
                .map_err(credfuse::Error::from)?;
        }
        let bytes = writer.into_inner().map_err(|e| CliError::validation(e.to_string()))?;
        manifest.put(&ctx.out, artifact::IMPORTANCE_SHIFT_CSV, &bytes)?;

        // Case selection reads the scored holdout files, so it always agrees
        // with what evaluation reported.
        let structured_preds = predictions_from_csv(
            &read_required(
                &ctx.out,
                &artifact::predictions_csv(ModelFamily::Dl, FeatureSubset::Structured, "holdout"),
                "evaluate",
            )?,
            ModelFamily::Dl,
            FeatureSubset::Structured,
        )?;
        let combined_preds = predictions_from_csv(
            &read_required(
                &ctx.out,
                &artifact::predictions_csv(ModelFamily::Dl, FeatureSubset::Combined, "holdout"),
                "evaluate",
            )?,
            ModelFamily::Dl,
            FeatureSubset::Combined,
        )?;
        let selection = select_uncertain_improved(
            &structured_preds,
            &combined_preds,
            &ctx.config.explain.uncertain,
        )?;
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["id", "structured_score", "combined_score", "label", "improvement"])
            .map_err(credfuse::Error::from)?;
        for case in &selection.cases {
            writer
                .write_record([
                    case.id.to_string(),
                    case.structured.to_string(),
                    case.combined.to_string(),
                    case.label.to_string(),
                    case.improvement.to_string(),
                ])
                .map_err(credfuse::Error::from)?;
        }
        let bytes = writer.into_inner().map_err(|e| CliError::validation(e.to_string()))?;
        manifest.put(&ctx.out, artifact::UNCERTAIN_CSV, &bytes)?;

        // Word attributions need the raw assessments.
        let dataset_path = ctx.path(artifact::DATASET);
        if !dataset_path.is_file() {
            return Err(CliError::missing(artifact::DATASET, "synth"));
        }
        let dataset = load_dataset(&dataset_path, &synthetic_schema())?;
        let by_id: BTreeMap<u64, &LoanRecord> =
            dataset.records.iter().map(|r| (r.id, r)).collect();

        let scorer = |docs: &[Vec<String>]| -> credfuse::Result<Vec<f64>> {
            let encoded: credfuse::Result<Vec<TokenSequence>> = docs
                .iter()
                .map(|doc| encode_for_transformer(doc, &vocab, max_len))
                .collect();
            classifier.predict(&encoded?)
        };
        let mut explanations: Vec<(u64, LimeExplanation)> = Vec::new();
        for case in selection.cases.iter().take(ctx.config.explain.lime_cases) {
            let record = by_id.get(&case.id).ok_or_else(|| {
                CliError::validation(format!(
                    "uncertain case {} is missing from {}",
                    case.id,
                    artifact::DATASET
                ))
            })?;
            let lime_cfg = LimeConfig {
                seed: ctx.stage_seed(&format!("explain-lime-{}", case.id)),
                ..ctx.config.explain.lime.clone()
            };
            explanations.push((case.id, lime_text(&scorer, &record.text, &lime_cfg)?));
        }

        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["case_id", "intercept", "local_r2", "n_samples", "n_words"])
            .map_err(credfuse::Error::from)?;
        for (id, e) in &explanations {
            writer
                .write_record([
                    id.to_string(),
                    e.intercept.to_string(),
                    e.local_r2.to_string(),
                    e.n_samples.to_string(),
                    e.words.len().to_string(),
                ])
                .map_err(credfuse::Error::from)?;
        }
        let bytes = writer.into_inner().map_err(|e| CliError::validation(e.to_string()))?;
        manifest.put(&ctx.out, artifact::LIME_CASES_CSV, &bytes)?;

        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["case_id", "word", "weight"]).map_err(credfuse::Error::from)?;
        for (id, e) in &explanations {
            for ww in &e.words {
                writer
                    .write_record([id.to_string(), ww.word.clone(), ww.weight.to_string()])
                    .map_err(credfuse::Error::from)?;
            }
        }
        let bytes = writer.into_inner().map_err(|e| CliError::validation(e.to_string()))?;
        manifest.put(&ctx.out, artifact::LIME_WORDS_CSV, &bytes)?;

        let stopwords = load_stopwords(&ctx.config.text)?;
        let only_explanations: Vec<LimeExplanation> =
            explanations.iter().map(|(_, e)| e.clone()).collect();
        let aggregated = aggregate_word_importance(
            &only_explanations,
            stem,
            &stopwords,
            ctx.config.explain.top_k_words,
        );
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["rank", "stem", "mean_impact", "n_docs"])
            .map_err(credfuse::Error::from)?;
        for (rank, word) in aggregated.iter().enumerate() {
            writer
                .write_record([
                    (rank + 1).to_string(),
                    word.stem.clone(),
                    word.mean_impact.to_string(),
                    word.n_docs.to_string(),
                ])
                .map_err(credfuse::Error::from)?;
        }
        let bytes = writer.into_inner().map_err(|e| CliError::validation(e.to_string()))?;
        manifest.put(&ctx.out, artifact::TOP_WORDS_CSV, &bytes)?;

        log::info!(
            "explain: {} uncertain cases selected, {} given word attributions",
            selection.cases.len(),
            explanations.len()
        );
        Ok(())
    })
}

fn importance_csv(report: &PermutationImportanceReport) -> CliResult<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["name", "mean_drop", "std_drop", "present_repeats", "flagged"])
        .map_err(credfuse::Error::from)?;
    for feature in &report.features {
        writer
            .write_record([
                feature.name.clone(),
                feature.mean_drop.to_string(),
                feature.std_drop.to_string(),
                feature.present_repeats.to_string(),
                feature.flagged.to_string(),
            ])
            .map_err(credfuse::Error::from)?;
    }
    writer.into_inner().map_err(|e| CliError::validation(e.to_string()))
}

type Rebuilt<'a> = (Vec<Vec<f64>>, Vec<Vec<usize>>, Option<&'a [TokenSequence]>);

/// Reassemble model inputs from permutation columns laid out as continuous
/// values, then category codes, then optionally the document column.
fn rebuild_columns<'a>(
    cols: &'a [ColumnData],
    n_cont: usize,
    n_cat: usize,
) -> credfuse::Result<Rebuilt<'a>> {
    let n_rows = cols.first().map(|c| c.len()).unwrap_or(0);
    let mut cont = vec![Vec::with_capacity(n_cont); n_rows];
    let mut codes = vec![Vec::with_capacity(n_cat); n_rows];
    let mut docs = None;
    for (j, col) in cols.iter().enumerate() {
        match col {
            ColumnData::Values(values) if j < n_cont => {
                for (row, &v) in values.iter().enumerate() {
                    cont[row].push(v);
                }
            }
            ColumnData::Codes(column) if j >= n_cont && j < n_cont + n_cat => {
                for (row, &c) in column.iter().enumerate() {
                    codes[row].push(c);
                }
            }
            ColumnData::Docs(sequences) if j == n_cont + n_cat => {
                docs = Some(sequences.as_slice());
            }
            _ => {
                return Err(credfuse::Error::validation(format!(
                    "column {j} does not match the expected layout"
                )))
            }
        }
    }
    Ok((cont, codes, docs))
}
