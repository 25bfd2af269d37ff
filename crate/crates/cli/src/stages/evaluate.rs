use credfuse::baselines::{predict_forest, predict_linear, ElasticNetModel, ForestModel};
use credfuse::data::Segment;
use credfuse::eval::{
    auc_by_wordcount, correlation_matrix, decile_thresholds, segment_report, FeatureSubset,
    PredictionSet, ReportGrid,
};
use credfuse::model_io;

use crate::artifact::{self, read_required_text, PARTS};
use crate::config::ModelFamily;
use crate::error::{CliError, CliResult};
use crate::RunContext;

use super::train::{load_dl_combined, load_dl_structured, load_dl_text};
use super::{cat_widths, json_bytes, load_codec, load_table, with_stage};

fn subset_index(subset: FeatureSubset) -> usize {
    FeatureSubset::ALL.iter().position(|&s| s == subset).unwrap()
}

fn load_baseline<T: model_io::ModelKind>(
    ctx: &RunContext,
    family: ModelFamily,
    subset: FeatureSubset,
) -> CliResult<T> {
    let rel = artifact::model_file(family, subset);
    let producer = format!("train --model {family} --subset {subset}");
    let text = read_required_text(&ctx.out, &rel, &producer)?;
    Ok(model_io::model_from_str(&text)?)
}

/// Score every (family, subset) cell on all four splits; write prediction
/// files, the segmented metric grid, score correlations and the word-count
/// curves of the text models.
pub fn run(ctx: &RunContext) -> CliResult<()> {
    with_stage(ctx, "evaluate", |ctx, manifest| {
        let codec = load_codec(ctx)?;
        let widths = cat_widths(&codec);
        let max_len = ctx.config.text.max_len;

        let lr: Vec<ElasticNetModel> = FeatureSubset::ALL
            .iter()
            .map(|&s| load_baseline(ctx, ModelFamily::Lr, s))
            .collect::<CliResult<_>>()?;
        let rf: Vec<ForestModel> = FeatureSubset::ALL
            .iter()
            .map(|&s| load_baseline(ctx, ModelFamily::Rf, s))
            .collect::<CliResult<_>>()?;
        let mlp = load_dl_structured(ctx)?;
        let classifier = load_dl_text(ctx)?;
        let combined = load_dl_combined(ctx)?;

        let mut tagged: Vec<(String, PredictionSet)> = Vec::new();
        for part in PARTS {
            let table = load_table(ctx, part)?;
            let seqs = table.sequences(max_len)?;
            for subset in FeatureSubset::ALL {
                let x = table.matrix(subset, &widths)?;
                let si = subset_index(subset);
                for family in ModelFamily::ALL {
                    let scores = match family {
                        ModelFamily::Lr => predict_linear(&lr[si], &x)?,
                        ModelFamily::Rf => predict_forest(&rf[si], &x)?,
                        ModelFamily::Dl => match subset {
                            FeatureSubset::Structured => {
                                mlp.predict(&table.codes, &table.cont)?
                            }
                            FeatureSubset::Text => classifier.predict(&seqs)?,
                            FeatureSubset::Combined => {
                                combined.predict(&table.codes, &table.cont, &seqs)?
                            }
                        },
                    };
                    let set = PredictionSet::new(
                        family.as_str(),
                        subset,
                        table.ids.clone(),
                        scores,
                        table.labels.clone(),
                        table.word_counts.clone(),
                        table.segments.clone(),
                    )?;
                    manifest.put(
                        &ctx.out,
                        &artifact::predictions_csv(family, subset, part),
                        &predictions_to_csv(&set)?,
                    )?;
                    tagged.push((part.to_string(), set));
                }
            }
        }

        let refs: Vec<(String, &PredictionSet)> =
            tagged.iter().map(|(part, set)| (part.clone(), set)).collect();
        let grid = segment_report(&refs);
        manifest.put(&ctx.out, artifact::GRID_JSON, &json_bytes(&grid)?)?;
        manifest.put(&ctx.out, artifact::GRID_CSV, &grid_to_csv(&grid)?)?;

        manifest.put(&ctx.out, artifact::CORRELATIONS_CSV, &correlations_csv(&tagged)?)?;

        for family in ModelFamily::ALL {
            let set = tagged
                .iter()
                .find(|(part, s)| {
                    part == "holdout"
                        && s.model == family.as_str()
                        && s.subset == FeatureSubset::Text
                })
                .map(|(_, s)| s)
                .expect("text holdout set was just scored");
            let configured = &ctx.config.eval.word_count_thresholds;
            let thresholds = if configured.is_empty() {
                decile_thresholds(&set.word_counts)
            } else {
                configured.clone()
            };
            let curve = auc_by_wordcount(set, &thresholds)?;
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer
                .write_record(["threshold", "n", "auc"])
                .map_err(credfuse::Error::from)?;
            for point in &curve.points {
                let auc = point.auc.map(|a| a.to_string()).unwrap_or_default();
                writer
                    .write_record([point.threshold.to_string(), point.n.to_string(), auc])
                    .map_err(credfuse::Error::from)?;
            }
            let bytes = writer.into_inner().map_err(|e| CliError::validation(e.to_string()))?;
            manifest.put(&ctx.out, &artifact::wordcount_csv(family), &bytes)?;
        }

        log::info!("evaluate: {} prediction sets scored", tagged.len());
        Ok(())
    })
}

fn predictions_to_csv(set: &PredictionSet) -> CliResult<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["id", "label", "segment", "word_count", "score"])
        .map_err(credfuse::Error::from)?;
    for i in 0..set.len() {
        writer
            .write_record([
                set.ids[i].to_string(),
                set.labels[i].to_string(),
                set.segments[i].as_str().to_string(),
                set.word_counts[i].to_string(),
                set.scores[i].to_string(),
            ])
            .map_err(credfuse::Error::from)?;
    }
    writer.into_inner().map_err(|e| CliError::validation(e.to_string()))
}

/// Parse a prediction file back into a set, tagged with its origin.
pub(crate) fn predictions_from_csv(
    bytes: &[u8],
    family: ModelFamily,
    subset: FeatureSubset,
) -> CliResult<PredictionSet> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut segments = Vec::new();
    let mut word_counts = Vec::new();
    let mut scores = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(credfuse::Error::from)?;
        let field = |j: usize| record.get(j).unwrap_or("");
        let bad = |what: &str, value: &str| {
            CliError::validation(format!("prediction row {row_no}: bad {what} {value:?}"))
        };
        ids.push(field(0).parse().map_err(|_| bad("id", field(0)))?);
        labels.push(field(1).parse().map_err(|_| bad("label", field(1)))?);
        segments.push(Segment::parse(field(2))?);
        word_counts.push(field(3).parse().map_err(|_| bad("word_count", field(3)))?);
        scores.push(field(4).parse().map_err(|_| bad("score", field(4)))?);
    }
    Ok(PredictionSet::new(family.as_str(), subset, ids, scores, labels, word_counts, segments)?)
}

fn grid_to_csv(grid: &ReportGrid) -> CliResult<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "model",
            "subset",
            "split",
            "segment",
            "n",
            "default_rate",
            "auc",
            "weighted_brier",
            "best_auc",
            "best_brier",
        ])
        .map_err(credfuse::Error::from)?;
    for cell in &grid.cells {
        let (n, rate, auc, brier) = match &cell.report {
            Some(r) => (
                r.n.to_string(),
                r.default_rate.to_string(),
                r.auc.to_string(),
                r.weighted_brier.to_string(),
            ),
            None => (String::new(), String::new(), String::new(), String::new()),
        };
        writer
            .write_record([
                cell.model.clone(),
                cell.subset.to_string(),
                cell.split.clone(),
                cell.segment.clone(),
                n,
                rate,
                auc,
                brier,
                cell.best_auc.to_string(),
                cell.best_brier.to_string(),
            ])
            .map_err(credfuse::Error::from)?;
    }
    writer.into_inner().map_err(|e| CliError::validation(e.to_string()))
}

/// Spearman correlations between the three subsets of each family on the
/// holdout split, overall and per segment.
fn correlations_csv(tagged: &[(String, PredictionSet)]) -> CliResult<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["model", "segment", "subset_a", "subset_b", "spearman"])
        .map_err(credfuse::Error::from)?;
    for family in ModelFamily::ALL {
        let sets: Vec<&PredictionSet> = FeatureSubset::ALL
            .iter()
            .map(|&subset| {
                tagged
                    .iter()
                    .find(|(part, s)| {
                        part == "holdout" && s.model == family.as_str() && s.subset == subset
                    })
                    .map(|(_, s)| s)
                    .expect("holdout sets were just scored")
            })
            .collect();
        let matrix = correlation_matrix(&sets)?;
        for (segment, rho) in &matrix.by_segment {
            for i in 0..matrix.subsets.len() {
                for j in (i + 1)..matrix.subsets.len() {
                    writer
                        .write_record([
                            family.as_str().to_string(),
                            segment.clone(),
                            matrix.subsets[i].to_string(),
                            matrix.subsets[j].to_string(),
                            rho[i][j].to_string(),
                        ])
                        .map_err(credfuse::Error::from)?;
                }
            }
        }
    }
    writer.into_inner().map_err(|e| CliError::validation(e.to_string()))
}
