use std::fmt::Write as _;

use credfuse::baselines::CvSearchReport;
use credfuse::eval::{FeatureSubset, MetricReport, ReportGrid};
use credfuse::explain::PermutationImportanceReport;

use crate::artifact::{self, read_required, read_required_text, PARTS};
use crate::config::ModelFamily;
use crate::error::CliResult;
use crate::manifest::RunManifest;
use crate::RunContext;

use super::{from_json, with_stage};

/// Consolidated markdown report over the evaluation and explanation
/// artifacts. Pure function of those files, so reruns are byte-identical.
pub fn run(ctx: &RunContext) -> CliResult<()> {
    with_stage(ctx, "report", |ctx, manifest| {
        let grid: ReportGrid =
            from_json(artifact::GRID_JSON, &read_required_text(&ctx.out, artifact::GRID_JSON, "evaluate")?)?;
        let correlations = read_csv(ctx, artifact::CORRELATIONS_CSV, "evaluate")?;
        let curves: Vec<(ModelFamily, Csv)> = ModelFamily::ALL
            .into_iter()
            .map(|f| Ok((f, read_csv(ctx, &artifact::wordcount_csv(f), "evaluate")?)))
            .collect::<CliResult<_>>()?;
        let base_importance: PermutationImportanceReport = from_json(
            artifact::IMPORTANCE_STRUCTURED_JSON,
            &read_required_text(&ctx.out, artifact::IMPORTANCE_STRUCTURED_JSON, "explain")?,
        )?;
        let shift = read_csv(ctx, artifact::IMPORTANCE_SHIFT_CSV, "explain")?;
        let uncertain = read_csv(ctx, artifact::UNCERTAIN_CSV, "explain")?;
        let top_words = read_csv(ctx, artifact::TOP_WORDS_CSV, "explain")?;

        let mut searches: Vec<(ModelFamily, FeatureSubset, CvSearchReport)> = Vec::new();
        for family in [ModelFamily::Lr, ModelFamily::Rf] {
            for subset in FeatureSubset::ALL {
                let rel = artifact::search_file(family, subset);
                let producer = format!("train --model {family} --subset {subset}");
                let report = from_json(&rel, &read_required_text(&ctx.out, &rel, &producer)?)?;
                searches.push((family, subset, report));
            }
        }

        let text = render(
            ctx,
            manifest,
            &grid,
            &correlations,
            &curves,
            &base_importance,
            &shift,
            &uncertain,
            &top_words,
            &searches,
        );
        manifest.put(&ctx.out, artifact::REPORT_MD, text.as_bytes())?;
        log::info!("report: {} written", artifact::REPORT_MD);
        Ok(())
    })
}

struct Csv {
    rows: Vec<Vec<String>>,
}

fn read_csv(ctx: &RunContext, rel: &str, producer: &str) -> CliResult<Csv> {
    let bytes = read_required(&ctx.out, rel, producer)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(&bytes[..]);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(credfuse::Error::from)?;
        rows.push(record.iter().map(|s| s.to_string()).collect());
    }
    Ok(Csv { rows })
}

fn fmt3(value: f64) -> String {
    format!("{value:.3}")
}

fn fmt3_str(raw: &str) -> String {
    raw.parse::<f64>().map(fmt3).unwrap_or_else(|_| "-".to_string())
}

fn find_report<'a>(
    grid: &'a ReportGrid,
    family: ModelFamily,
    subset: FeatureSubset,
    split: &str,
    segment: &str,
) -> Option<&'a MetricReport> {
    grid.cells
        .iter()
        .find(|c| {
            c.model == family.as_str()
                && c.subset == subset
                && c.split == split
                && c.segment == segment
        })
        .and_then(|c| c.report.as_ref())
}

fn is_best(
    grid: &ReportGrid,
    family: ModelFamily,
    subset: FeatureSubset,
    split: &str,
    segment: &str,
) -> bool {
    grid.cells
        .iter()
        .find(|c| {
            c.model == family.as_str()
                && c.subset == subset
                && c.split == split
                && c.segment == segment
        })
        .map(|c| c.best_auc)
        .unwrap_or(false)
}

fn metric_table(
    buf: &mut String,
    grid: &ReportGrid,
    split: &str,
    segment: &str,
    metric: impl Fn(&MetricReport) -> f64,
    mark_best: bool,
) {
    let _ = writeln!(buf, "| Family | Text | Structured | Combined |");
    let _ = writeln!(buf, "|---|---|---|---|");
    for family in ModelFamily::ALL {
        let mut cells = Vec::new();
        for subset in FeatureSubset::ALL {
            let value = find_report(grid, family, subset, split, segment)
                .map(|r| {
                    let mut text = fmt3(metric(r));
                    if mark_best && is_best(grid, family, subset, split, segment) {
                        text.push_str(" \\*");
                    }
                    text
                })
                .unwrap_or_else(|| "-".to_string());
            cells.push(value);
        }
        let _ = writeln!(buf, "| {family} | {} | {} | {} |", cells[0], cells[1], cells[2]);
    }
    let _ = writeln!(buf);
}

#[allow(clippy::too_many_arguments)]
fn render(
    ctx: &RunContext,
    manifest: &RunManifest,
    grid: &ReportGrid,
    correlations: &Csv,
    curves: &[(ModelFamily, Csv)],
    base_importance: &PermutationImportanceReport,
    shift: &Csv,
    uncertain: &Csv,
    top_words: &Csv,
    searches: &[(ModelFamily, FeatureSubset, CvSearchReport)],
) -> String {
    let mut buf = String::new();
    let out = &mut buf;

    let _ = writeln!(out, "# Run report");
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "Seed {}, config hash `{}`, library version {}.",
        ctx.seed,
        ctx.config.config_hash(),
        manifest.version
    );
    let _ = writeln!(out);
    let split_sizes: Vec<String> = PARTS
        .iter()
        .map(|part| {
            let n = find_report(grid, ModelFamily::Lr, FeatureSubset::Text, part, "all")
                .map(|r| r.n.to_string())
                .unwrap_or_else(|| "0".to_string());
            format!("{part} {n}")
        })
        .collect();
    let _ = writeln!(out, "Rows per split: {}.", split_sizes.join(", "));
    let _ = writeln!(out);

    let _ = writeln!(out, "## Model quality, holdout");
    let _ = writeln!(out);
    let _ = writeln!(out, "AUC by family and feature subset; \\* marks the column-best per row group.");
    let _ = writeln!(out);
    metric_table(out, grid, "holdout", "all", |r| r.auc, true);
    let _ = writeln!(out, "Class-weighted Brier score, lower is better.");
    let _ = writeln!(out);
    metric_table(out, grid, "holdout", "all", |r| r.weighted_brier, false);

    let _ = writeln!(out, "## Out-of-time stability");
    let _ = writeln!(out);
    for split in ["oot_early", "oot_late"] {
        let _ = writeln!(out, "AUC on {split}:");
        let _ = writeln!(out);
        metric_table(out, grid, split, "all", |r| r.auc, false);
    }

    let _ = writeln!(out, "## Customer segments, holdout AUC");
    let _ = writeln!(out);
    for segment in ["new", "existing"] {
        let _ = writeln!(out, "{segment} borrowers:");
        let _ = writeln!(out);
        metric_table(out, grid, "holdout", segment, |r| r.auc, false);
    }

    let _ = writeln!(out, "## Score correlations, holdout");
    let _ = writeln!(out);
    let _ = writeln!(out, "Spearman rank correlation between subsets of the same family.");
    let _ = writeln!(out);
    let _ = writeln!(out, "| Family | text vs structured | text vs combined | structured vs combined |");
    let _ = writeln!(out, "|---|---|---|---|");
    for family in ModelFamily::ALL {
        let pick = |a: &str, b: &str| {
            correlations
                .rows
                .iter()
                .find(|r| {
                    r[0] == family.as_str() && r[1] == "all" && r[2] == a && r[3] == b
                })
                .map(|r| fmt3_str(&r[4]))
                .unwrap_or_else(|| "-".to_string())
        };
        let _ = writeln!(
            out,
            "| {family} | {} | {} | {} |",
            pick("text", "structured"),
            pick("text", "combined"),
            pick("structured", "combined"),
        );
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "## Text AUC by minimum word count, holdout");
    let _ = writeln!(out);
    let _ = writeln!(out, "| Min words | n | lr | rf | dl |");
    let _ = writeln!(out, "|---|---|---|---|---|");
    if let Some((_, first)) = curves.first() {
        for row in &first.rows {
            let threshold = &row[0];
            let n = &row[1];
            let mut cells = Vec::new();
            for (_, csv) in curves {
                let value = csv
                    .rows
                    .iter()
                    .find(|r| &r[0] == threshold)
                    .map(|r| if r[2].is_empty() { "-".to_string() } else { fmt3_str(&r[2]) })
                    .unwrap_or_else(|| "-".to_string());
                cells.push(value);
            }
            let _ = writeln!(
                out,
                "| {threshold} | {n} | {} | {} | {} |",
                cells[0], cells[1], cells[2]
            );
        }
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "## Feature importance, neural models");
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "Permutation importance of the structured-only model ({} repeats, baseline AUC {}).",
        base_importance.repeats,
        fmt3(base_importance.baseline_auc)
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "| Feature | AUC drop | Std | Repeats |");
    let _ = writeln!(out, "|---|---|---|---|");
    let mut ranked: Vec<_> = base_importance.features.iter().collect();
    ranked.sort_by(|a, b| {
        b.mean_drop
            .abs()
            .total_cmp(&a.mean_drop.abs())
            .then_with(|| a.name.cmp(&b.name))
    });
    for feature in ranked.iter().take(10) {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            feature.name,
            fmt3(feature.mean_drop),
            fmt3(feature.std_drop),
            feature.present_repeats
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "Importance shift after adding text (most negative first; a negative \
         delta means the fusion model leans less on that feature):"
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "| Feature | Structured-only | Fusion | Delta |");
    let _ = writeln!(out, "|---|---|---|---|");
    for row in shift.rows.iter().take(5) {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            row[0],
            fmt3_str(&row[1]),
            fmt3_str(&row[2]),
            fmt3_str(&row[3])
        );
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "## Uncertain cases and influential words");
    let _ = writeln!(out);
    let (lo, hi) = (ctx.config.explain.uncertain.band_lo, ctx.config.explain.uncertain.band_hi);
    let _ = writeln!(
        out,
        "{} holdout cases fell in the uncertainty band [{lo}, {hi}], ranked by \
         how much the fusion score improved on the structured-only score. Word \
         attributions cover the top {} cases.",
        uncertain.rows.len(),
        ctx.config.explain.lime_cases.min(uncertain.rows.len()),
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "| Rank | Stem | Mean impact | Cases |");
    let _ = writeln!(out, "|---|---|---|---|");
    for row in &top_words.rows {
        let _ = writeln!(out, "| {} | {} | {} | {} |", row[0], row[1], fmt3_str(&row[2]), row[3]);
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "## Chosen hyperparameters");
    let _ = writeln!(out);
    let _ = writeln!(out, "| Family | Subset | Parameters | CV AUC |");
    let _ = writeln!(out, "|---|---|---|---|");
    for (family, subset, search) in searches {
        let chosen = search.chosen_candidate();
        let params: Vec<String> =
            chosen.params.iter().map(|(k, v)| format!("{k} {v:.4}")).collect();
        let _ = writeln!(
            out,
            "| {family} | {subset} | {} | {} |",
            params.join(", "),
            fmt3(chosen.mean_auc)
        );
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "## Artifacts");
    let _ = writeln!(out);
    for (rel, hash) in &manifest.artifacts {
        if rel == artifact::REPORT_MD {
            continue;
        }
        let short = hash.strip_prefix("sha256:").unwrap_or(hash);
        let short = &short[..short.len().min(12)];
        let _ = writeln!(out, "- `{rel}` `{short}`");
    }

    buf
}
