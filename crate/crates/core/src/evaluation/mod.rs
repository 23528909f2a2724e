//! Instance matching, average precision, and distribution agreement of
//! per-cell features.

mod ap;
mod ks;
mod report;

pub use ap::{
    average_precision, average_precision_multi, interpolated_ap, mask_iou, match_detections,
    Detection, ImageInstances, MatchResult,
};
pub use ks::ks_statistic;
pub use report::{build_report, class_ap, feature_ks, format_tables, reference, EvalReport, PatchEval};
