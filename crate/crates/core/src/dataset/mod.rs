//! Annotation interchange: COCO JSON in and out, QuPath-style GeoJSON,
//! feature CSV tables, patient-level splitting and the on-disk patch layout.

mod coco;
mod geojson;
mod layout;
mod split;
mod table;

pub use coco::{export_coco, parse_coco, ParseIssue, ParsedCoco, PatchDescriptor};
pub use geojson::{export_geojson, parse_geojson};
pub use layout::{scan_patches, PatchFile, ANNOTATIONS_FILE};
pub use split::{split_by_patient, DatasetSplit, SplitName, DEFAULT_FRACTIONS};
pub use table::{export_feature_csv, parse_feature_csv, FeatureRow};

use crate::geometry::Polygon;

/// Default physical resolution of a patch, micrometres per pixel.
pub const DEFAULT_SCALE_UM_PER_PX: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellClass {
    NucleusOnly,
    WholeCell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Gold,
    Predicted,
}

/// A nucleus, optionally paired with the whole cell that contains it.
#[derive(Debug, Clone, PartialEq)]
pub struct CellInstance {
    pub id: u64,
    pub patch_id: String,
    pub nucleus: Polygon,
    pub cell: Option<Polygon>,
    /// Detection score in [0, 1]; `None` for score-free sources.
    pub confidence: Option<f64>,
    pub source: Source,
}

impl CellInstance {
    pub fn nucleus_only(id: u64, nucleus: Polygon, source: Source) -> Self {
        Self {
            id,
            patch_id: String::new(),
            nucleus,
            cell: None,
            confidence: None,
            source,
        }
    }

    pub fn whole_cell(id: u64, nucleus: Polygon, cell: Polygon, source: Source) -> Self {
        Self {
            cell: Some(cell),
            ..Self::nucleus_only(id, nucleus, source)
        }
    }

    pub fn class(&self) -> CellClass {
        if self.cell.is_some() {
            CellClass::WholeCell
        } else {
            CellClass::NucleusOnly
        }
    }

    /// Confidence used for ranking; score-free instances rank as 1.0.
    pub fn score(&self) -> f64 {
        self.confidence.unwrap_or(1.0)
    }
}
