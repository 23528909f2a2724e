//! Classical and geometric machinery for benchmarking whole-cell segmentation
//! in H&E histology patches.
//!
//! The pipeline stages are:
//!
//! 1. **Stain** – optical density, Macenko stain-matrix estimation,
//!    normalization to a reference and colour deconvolution.
//! 2. **Watershed** – hematoxylin-channel nucleus detection with background
//!    subtraction, smoothing, thresholding and seeded watershed splitting.
//! 3. **Expansion** – constrained nucleus expansion into whole cells.
//! 4. **Cyto ROI** – nucleus ROI scaling, cytoplasm refinement inside the
//!    scaled ROI, and paired mask NMS.
//! 5. **Morphometry** – the 17 per-cell shape and staining features.
//! 6. **Evaluation** – class-specific AP50/AP75 and Kolmogorov-Smirnov
//!    agreement between feature distributions.
//!
//! Annotations travel through [`dataset`] as COCO JSON, GeoJSON and CSV.

pub mod cli;
pub mod config;
pub mod cyto_roi;
pub mod dataset;
pub mod edt;
pub mod error;
pub mod evaluation;
pub mod expansion;
pub mod filters;
pub mod geometry;
pub mod patch;
pub mod morphometry;
pub mod stain;
pub mod synthetic;
pub mod watershed;

pub use error::{Error, Result};
pub use geometry::{Mask, Point, Polygon};
pub use patch::{Grid, ImagePatch};
