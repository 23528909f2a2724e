//! The 17 per-cell features: six shape measurements, nucleus-to-cell ratio
//! and ten hematoxylin/eosin intensity statistics.
//!
//! Shape features are computed on the vector polygon; intensity statistics
//! over the pixel-centre rasterization of the cell polygon.

use serde::{Deserialize, Serialize};

use crate::dataset::CellInstance;
use crate::error::{Error, Result};
use crate::geometry::{convex_hull, rasterize, ring_area, rotating_calipers, Mask, Polygon};
use crate::stain::ConcentrationMap;

/// Column names of a feature row, in order.
pub const FEATURE_NAMES: [&str; 17] = [
    "area_um2",
    "perimeter_um",
    "circularity",
    "solidity",
    "max_diameter_um",
    "min_diameter_um",
    "nucleus_cell_ratio",
    "h_median",
    "h_mean",
    "h_std",
    "h_max",
    "h_min",
    "e_median",
    "e_mean",
    "e_std",
    "e_max",
    "e_min",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeFeatures {
    pub area: f64,
    pub perimeter: f64,
    pub circularity: f64,
    pub solidity: f64,
}

pub fn shape_features(poly: &Polygon, scale: f64) -> Result<ShapeFeatures> {
    let area_px = poly.area();
    let hull = convex_hull(poly.vertices());
    let hull_area = ring_area(&hull);
    if !(area_px > 0.0) || !(hull_area > 0.0) {
        return Err(Error::InvalidPolygon("degenerate polygon".into()));
    }
    let perimeter_px = poly.perimeter();
    Ok(ShapeFeatures {
        area: area_px * scale * scale,
        perimeter: perimeter_px * scale,
        // ratio taken in pixel units so that scaling cannot perturb it
        circularity: 4.0 * std::f64::consts::PI * area_px / (perimeter_px * perimeter_px),
        solidity: (area_px / hull_area).min(1.0),
    })
}

/// `(min_diameter, max_diameter)`: minimum caliper width and convex-hull
/// diameter, scaled to micrometres.
pub fn calipers_diameters(poly: &Polygon, scale: f64) -> Result<(f64, f64)> {
    let hull = convex_hull(poly.vertices());
    if hull.len() < 3 {
        return Err(Error::InvalidPolygon("degenerate convex hull".into()));
    }
    let c = rotating_calipers(&hull);
    Ok((c.width * scale, c.diameter * scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub median: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub max: f64,
    pub min: f64,
}

impl ChannelStats {
    pub fn of(values: &mut [f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyMask);
        }
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let median = if n % 2 == 1 {
            values[n / 2]
        } else {
            (values[n / 2 - 1] + values[n / 2]) / 2.0
        };
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        Ok(Self {
            median,
            mean,
            std: var.sqrt(),
            max: values[n - 1],
            min: values[0],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StainStats {
    pub h: ChannelStats,
    pub e: ChannelStats,
}

pub fn stain_stats(mask: &Mask, conc: &ConcentrationMap) -> Result<StainStats> {
    if mask.dims() != (conc.width(), conc.height()) {
        return Err(Error::DimensionMismatch(format!(
            "mask {:?} vs concentration map {}x{}",
            mask.dims(),
            conc.width(),
            conc.height()
        )));
    }
    let (mut h, mut e): (Vec<f64>, Vec<f64>) = mask
        .pixels()
        .map(|(x, y)| (*conc.h.get(x, y), *conc.e.get(x, y)))
        .unzip();
    Ok(StainStats {
        h: ChannelStats::of(&mut h)?,
        e: ChannelStats::of(&mut e)?,
    })
}

/// All 17 measurements of one whole cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub area: f64,
    pub perimeter: f64,
    pub circularity: f64,
    pub solidity: f64,
    pub max_diameter: f64,
    pub min_diameter: f64,
    pub nucleus_to_cell_ratio: f64,
    pub h: ChannelStats,
    pub e: ChannelStats,
}

impl FeatureRecord {
    /// Inverse of [`FeatureRecord::values`].
    pub fn from_values(v: [f64; 17]) -> Self {
        let channel = |o: usize| ChannelStats {
            median: v[o],
            mean: v[o + 1],
            std: v[o + 2],
            max: v[o + 3],
            min: v[o + 4],
        };
        Self {
            area: v[0],
            perimeter: v[1],
            circularity: v[2],
            solidity: v[3],
            max_diameter: v[4],
            min_diameter: v[5],
            nucleus_to_cell_ratio: v[6],
            h: channel(7),
            e: channel(12),
        }
    }

    /// Values in [`FEATURE_NAMES`] order.
    pub fn values(&self) -> [f64; 17] {
        [
            self.area,
            self.perimeter,
            self.circularity,
            self.solidity,
            self.max_diameter,
            self.min_diameter,
            self.nucleus_to_cell_ratio,
            self.h.median,
            self.h.mean,
            self.h.std,
            self.h.max,
            self.h.min,
            self.e.median,
            self.e.mean,
            self.e.std,
            self.e.max,
            self.e.min,
        ]
    }
}

pub fn feature_record(
    instance: &CellInstance,
    conc: &ConcentrationMap,
    scale: f64,
) -> Result<FeatureRecord> {
    let cell = instance.cell.as_ref().ok_or(Error::MissingCell)?;
    let shape = shape_features(cell, scale)?;
    let (min_diameter, max_diameter) = calipers_diameters(cell, scale)?;
    let mask = rasterize(cell, conc.width(), conc.height());
    let stats = stain_stats(&mask, conc)?;
    Ok(FeatureRecord {
        area: shape.area,
        perimeter: shape.perimeter,
        circularity: shape.circularity,
        solidity: shape.solidity,
        max_diameter,
        min_diameter,
        nucleus_to_cell_ratio: instance.nucleus.area() / cell.area(),
        h: stats.h,
        e: stats.e,
    })
}
