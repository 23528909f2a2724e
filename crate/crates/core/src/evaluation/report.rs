use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ap::{average_precision_multi, Detection, ImageInstances};
use super::ks::ks_statistic;
use crate::dataset::CellInstance;
use crate::error::{Error, Result};
use crate::geometry::rasterize;
use crate::morphometry::{FeatureRecord, FEATURE_NAMES};

/// Published scores of the compared models, kept for side-by-side display.
pub mod reference {
    pub const MODELS: [&str; 5] = [
        "QuPath Default",
        "QuPath Finetuned",
        "Cellpose",
        "StarDist",
        "Cyto R-CNN",
    ];

    /// AP50/AP75 nucleus, AP50/AP75 cell (percent), rows in [`MODELS`] order.
    pub const AP: [[f64; 4]; 5] = [
        [22.95, 6.85, 11.12, 0.28],
        [35.24, 11.07, 19.46, 0.91],
        [48.35, 23.84, 31.85, 5.61],
        [70.36, 47.24, 45.33, 2.32],
        [78.32, 42.54, 58.65, 11.56],
    ];

    /// Model order of the KS columns.
    pub const KS_MODELS: [&str; 5] = [
        "QuPath Default",
        "QuPath Finetuned",
        "StarDist",
        "Cellpose",
        "Cyto R-CNN",
    ];

    /// D per feature (rows in feature order) and model (columns in
    /// [`KS_MODELS`] order).
    pub const KS: [[f64; 5]; 17] = [
        [0.54, 0.26, 0.32, 0.27, 0.25],
        [0.60, 0.42, 0.49, 0.40, 0.29],
        [0.31, 0.61, 0.61, 0.47, 0.24],
        [0.11, 0.48, 0.55, 0.46, 0.24],
        [0.64, 0.48, 0.56, 0.42, 0.34],
        [0.39, 0.17, 0.21, 0.19, 0.20],
        [0.17, 0.37, 0.41, 0.51, 0.17],
        [0.11, 0.24, 0.13, 0.19, 0.14],
        [0.10, 0.17, 0.13, 0.19, 0.11],
        [0.05, 0.17, 0.12, 0.05, 0.07],
        [0.17, 0.09, 0.05, 0.07, 0.03],
        [0.13, 0.13, 0.10, 0.19, 0.04],
        [0.10, 0.16, 0.15, 0.19, 0.13],
        [0.07, 0.17, 0.15, 0.14, 0.11],
        [0.06, 0.17, 0.12, 0.10, 0.08],
        [0.07, 0.06, 0.06, 0.07, 0.07],
        [0.11, 0.11, 0.08, 0.08, 0.05],
    ];

    /// Published mean agreement, [`KS_MODELS`] order. Only one QuPath value
    /// is quoted; it matches the default column.
    pub const MEAN_D: [Option<f64>; 5] = [Some(0.22), None, Some(0.25), Some(0.23), Some(0.15)];

    /// Column mean of [`KS`] for model column `j`.
    pub fn ks_column_mean(j: usize) -> f64 {
        KS.iter().map(|row| row[j]).sum::<f64>() / KS.len() as f64
    }
}

/// Predictions and gold annotations of one patch.
#[derive(Debug, Clone)]
pub struct PatchEval {
    pub patch_id: String,
    pub width: usize,
    pub height: usize,
    pub predicted: Vec<CellInstance>,
    pub gold: Vec<CellInstance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub ap50_nucleus: f64,
    pub ap75_nucleus: f64,
    pub ap50_cell: f64,
    pub ap75_cell: f64,
    /// D per feature, in feature order.
    #[serde(serialize_with = "ks_to_map", deserialize_with = "ks_from_map")]
    pub ks: Vec<(String, f64)>,
    pub mean_d: f64,
}

fn ks_to_map<S: Serializer>(ks: &[(String, f64)], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_map(ks.iter().map(|(k, v)| (k, v)))
}

fn ks_from_map<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<(String, f64)>, D::Error> {
    let mut map = BTreeMap::<String, f64>::deserialize(d)?;
    FEATURE_NAMES
        .iter()
        .map(|name| {
            map.remove(*name)
                .map(|v| (name.to_string(), v))
                .ok_or_else(|| serde::de::Error::custom(format!("missing KS entry {name}")))
        })
        .collect()
}

/// Per-class mask sets of every patch.
fn class_images(patches: &[PatchEval], cells: bool) -> Vec<ImageInstances> {
    let pick = |inst: &CellInstance| {
        if cells {
            inst.cell.clone()
        } else {
            Some(inst.nucleus.clone())
        }
    };
    patches
        .iter()
        .map(|p| ImageInstances {
            detections: p
                .predicted
                .iter()
                .filter_map(|inst| {
                    pick(inst).map(|poly| Detection {
                        mask: rasterize(&poly, p.width, p.height),
                        confidence: inst.confidence,
                    })
                })
                .collect(),
            gold: p
                .gold
                .iter()
                .filter_map(|inst| pick(inst).map(|poly| rasterize(&poly, p.width, p.height)))
                .collect(),
        })
        .collect()
}

/// `(AP50, AP75)` per class: `[nucleus, cell]`.
pub fn class_ap(patches: &[PatchEval]) -> Result<[(f64, f64); 2]> {
    let mut out = [(0.0, 0.0); 2];
    for (slot, cells) in out.iter_mut().zip([false, true]) {
        let images = class_images(patches, cells);
        let ap50 = average_precision_multi(&images, 0.5)?;
        let ap75 = average_precision_multi(&images, 0.75)?;
        debug_assert!(ap75 <= ap50 + 1e-9);
        *slot = (ap50, ap75);
    }
    Ok(out)
}

/// D per feature between two pooled feature tables.
pub fn feature_ks(pred: &[FeatureRecord], gold: &[FeatureRecord]) -> Result<Vec<(String, f64)>> {
    let columns = |rows: &[FeatureRecord]| -> Vec<Vec<f64>> {
        let mut cols = vec![Vec::with_capacity(rows.len()); FEATURE_NAMES.len()];
        for r in rows {
            for (c, v) in cols.iter_mut().zip(r.values()) {
                c.push(v);
            }
        }
        cols
    };
    let (p, g) = (columns(pred), columns(gold));
    FEATURE_NAMES
        .iter()
        .zip(p.iter().zip(&g))
        .map(|(name, (a, b))| Ok((name.to_string(), ks_statistic(a, b)?)))
        .collect()
}

pub fn build_report(
    model: &str,
    patches: &[PatchEval],
    features_pred: &[FeatureRecord],
    features_gold: &[FeatureRecord],
) -> Result<EvalReport> {
    if patches.iter().all(|p| p.gold.is_empty()) {
        return Err(Error::EmptyGold);
    }
    let [(ap50_nucleus, ap75_nucleus), (ap50_cell, ap75_cell)] = class_ap(patches)?;
    let ks = feature_ks(features_pred, features_gold)?;
    let mean_d = ks.iter().map(|(_, d)| d).sum::<f64>() / ks.len() as f64;
    Ok(EvalReport {
        model: model.to_string(),
        ap50_nucleus,
        ap75_nucleus,
        ap50_cell,
        ap75_cell,
        ks,
        mean_d,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::from_json(e, text))
    }
}

/// Plain-text AP and KS tables for `reports`, followed by the published rows.
pub fn format_tables(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Average precision (%)");
    let _ = writeln!(
        out,
        "{:<24} {:>12} {:>12} {:>10} {:>10}",
        "Model", "AP50 Nucleus", "AP75 Nucleus", "AP50 Cell", "AP75 Cell"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<24} {:>12.2} {:>12.2} {:>10.2} {:>10.2}",
            r.model, r.ap50_nucleus, r.ap75_nucleus, r.ap50_cell, r.ap75_cell
        );
    }
    for (name, ap) in reference::MODELS.iter().zip(reference::AP) {
        let _ = writeln!(
            out,
            "{:<24} {:>12.2} {:>12.2} {:>10.2} {:>10.2}",
            format!("{name} (published)"),
            ap[0],
            ap[1],
            ap[2],
            ap[3]
        );
    }

    let _ = writeln!(out, "\nKolmogorov-Smirnov D against the gold standard");
    let mut header = format!("{:<20}", "Feature");
    for r in reports {
        let _ = write!(header, " {:>10}", truncate(&r.model, 10));
    }
    for name in reference::KS_MODELS {
        let _ = write!(header, " {:>10}", truncate(&format!("*{name}"), 10));
    }
    let _ = writeln!(out, "{header}");
    for (i, feature) in FEATURE_NAMES.iter().enumerate() {
        let mut line = format!("{feature:<20}");
        for r in reports {
            let _ = write!(line, " {:>10.2}", r.ks[i].1);
        }
        for d in reference::KS[i] {
            let _ = write!(line, " {d:>10.2}");
        }
        let _ = writeln!(out, "{line}");
    }
    let mut line = format!("{:<20}", "mean D");
    for r in reports {
        let _ = write!(line, " {:>10.2}", r.mean_d);
    }
    for j in 0..reference::KS_MODELS.len() {
        let _ = write!(line, " {:>10.2}", reference::ks_column_mean(j));
    }
    let _ = writeln!(out, "{line}");
    let _ = writeln!(out, "(* published values)");
    out
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}
