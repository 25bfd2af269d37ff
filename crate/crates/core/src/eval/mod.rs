//! Evaluation: metrics, prediction sets, word-count curves, report grids.

pub mod grid;
pub mod metrics;
pub mod predset;
pub mod wordcount;

pub use grid::{segment_report, GridCell, ReportGrid};
pub use metrics::{auc, average_ranks, spearman_rank_corr, weighted_brier};
pub use predset::{
    correlation_matrix, CorrelationMatrix, FeatureSubset, MetricReport, PredictionSet,
};
pub use wordcount::{auc_by_wordcount, decile_thresholds, CurvePoint, WordCountCurve};
