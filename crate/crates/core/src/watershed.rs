//! Watershed nucleus detection on the hematoxylin channel.
//!
//! deconvolve → hematoxylin → subtract disk opening (background) → threshold
//! the corrected channel → h-maxima seeds and watershed on its Gaussian
//! smoothing → area filter → outline.

use crate::config::{render, KeyValues};
use crate::dataset::{CellInstance, Source};
use crate::error::{Error, Result};
use crate::filters::{gaussian_blur, h_maxima, open_disk, round_radius, watershed};
use crate::geometry::{trace_outer, Mask};
use crate::patch::{Grid, ImagePatch};
use crate::stain::{deconvolve, ConcentrationMap, StainProfile};

/// Depth of the h-maxima suppression applied before seeding, in
/// concentration units.
pub const H_MAXIMA_DEPTH: f64 = 0.05;

/// Per-pixel object labels: 0 is background, objects are 1..=K.
pub type LabelMap = Grid<u32>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WatershedParams {
    /// µm
    pub background_radius: f64,
    /// µm
    pub sigma: f64,
    /// µm²
    pub min_area: f64,
    /// µm²
    pub max_area: f64,
    /// Hematoxylin concentration after background subtraction and smoothing.
    pub intensity_threshold: f64,
    /// µm, used by the expansion stage.
    pub expansion_radius: f64,
}

const KEYS: [&str; 6] = [
    "background_radius_um",
    "sigma_um",
    "min_area_um2",
    "max_area_um2",
    "intensity_threshold",
    "expansion_radius_um",
];

/// Stock QuPath 0.4.3 cell detection settings.
pub fn default_params() -> WatershedParams {
    WatershedParams {
        background_radius: 8.0,
        sigma: 1.5,
        min_area: 10.0,
        max_area: 400.0,
        intensity_threshold: 0.1,
        expansion_radius: 5.0,
    }
}

/// Settings tuned for tumour nuclei on the validation split.
pub fn finetuned_params() -> WatershedParams {
    WatershedParams {
        sigma: 2.5,
        min_area: 20.0,
        intensity_threshold: 0.15,
        ..default_params()
    }
}

impl WatershedParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("background_radius", self.background_radius),
            ("sigma", self.sigma),
            ("min_area", self.min_area),
            ("max_area", self.max_area),
            ("intensity_threshold", self.intensity_threshold),
            ("expansion_radius", self.expansion_radius),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParam(format!("{name} must be positive, got {v}")));
            }
        }
        if self.min_area >= self.max_area {
            return Err(Error::InvalidParam(format!(
                "min_area {} must be below max_area {}",
                self.min_area, self.max_area
            )));
        }
        Ok(())
    }

    /// Reads all six keys; missing keys fall back to `base`.
    pub fn from_config(kv: &KeyValues, base: WatershedParams) -> Result<Self> {
        let p = WatershedParams {
            background_radius: kv.get("background_radius_um")?.unwrap_or(base.background_radius),
            sigma: kv.get("sigma_um")?.unwrap_or(base.sigma),
            min_area: kv.get("min_area_um2")?.unwrap_or(base.min_area),
            max_area: kv.get("max_area_um2")?.unwrap_or(base.max_area),
            intensity_threshold: kv.get("intensity_threshold")?.unwrap_or(base.intensity_threshold),
            expansion_radius: kv.get("expansion_radius_um")?.unwrap_or(base.expansion_radius),
        };
        p.validate()?;
        Ok(p)
    }

    /// Parses a standalone parameter file; every key must be known.
    pub fn from_config_text(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.check_keys(&KEYS)?;
        Self::from_config(&kv, default_params())
    }

    pub fn to_config(&self) -> String {
        render(&[
            (KEYS[0], self.background_radius.to_string()),
            (KEYS[1], self.sigma.to_string()),
            (KEYS[2], self.min_area.to_string()),
            (KEYS[3], self.max_area.to_string()),
            (KEYS[4], self.intensity_threshold.to_string()),
            (KEYS[5], self.expansion_radius.to_string()),
        ])
    }

    pub fn config_keys() -> &'static [&'static str] {
        &KEYS
    }
}

/// Nuclei found in one patch, with the label map they were traced from.
#[derive(Debug, Clone)]
pub struct NucleusDetection {
    pub instances: Vec<CellInstance>,
    pub labels: LabelMap,
}

pub fn detect_nuclei(
    patch: &ImagePatch,
    profile: &StainProfile,
    params: &WatershedParams,
) -> Result<Vec<CellInstance>> {
    let conc = deconvolve(patch, profile, 255)?;
    let mut found = detect_in_concentrations(&conc, patch.scale(), params)?.instances;
    for inst in &mut found {
        inst.patch_id = patch.patch_id.clone();
    }
    Ok(found)
}

/// Detection on an already deconvolved patch. Instances are numbered 1..=K
/// in raster order of their first pixel.
pub fn detect_in_concentrations(
    conc: &ConcentrationMap,
    scale: f64,
    params: &WatershedParams,
) -> Result<NucleusDetection> {
    params.validate()?;
    let (w, h) = (conc.width(), conc.height());
    let hema = &conc.h;

    let bg_radius = round_radius(params.background_radius / scale);
    let background = open_disk(hema, bg_radius);
    let corrected = Grid {
        width: w,
        height: h,
        data: hema
            .data
            .iter()
            .zip(&background.data)
            .map(|(a, b)| a - b)
            .collect(),
    };
    let smoothed = gaussian_blur(&corrected, round_radius(params.sigma / scale));
    // the threshold applies before smoothing so that object boundaries are
    // not pushed outwards by the blur; smoothing only shapes seeds and basins
    let foreground: Vec<bool> = corrected
        .data
        .iter()
        .map(|&v| v > params.intensity_threshold)
        .collect();

    let (seeds, _) = h_maxima(&smoothed, H_MAXIMA_DEPTH, &foreground);
    let cost = smoothed.map(|v| -v);
    let basins = watershed(&cost, &seeds, &foreground);

    // pixel lists per basin label, in raster order
    let n_basins = basins.data.iter().copied().max().unwrap_or(0) as usize;
    let mut pixels: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_basins + 1];
    for (i, &l) in basins.data.iter().enumerate() {
        if l != 0 {
            pixels[l as usize].push((i % w, i / w));
        }
    }
    let px_area = scale * scale;
    let mut kept: Vec<&Vec<(usize, usize)>> = pixels[1..]
        .iter()
        .filter(|p| {
            let area = p.len() as f64 * px_area;
            !p.is_empty() && area >= params.min_area && area <= params.max_area
        })
        .collect();
    kept.sort_by_key(|p| (p[0].1, p[0].0));

    let mut labels = Grid::filled(w, h, 0u32);
    let mut instances = Vec::with_capacity(kept.len());
    for (k, px) in kept.iter().enumerate() {
        let label = k as u32 + 1;
        for &(x, y) in px.iter() {
            labels.set(x, y, label);
        }
        let mask = Mask::from_pixels(w, h, px.iter().copied());
        let poly = trace_outer(&mask).ok_or_else(|| {
            Error::InvalidPolygon(format!("could not outline detected object {label}"))
        })?;
        instances.push(CellInstance::nucleus_only(label as u64, poly, Source::Predicted));
    }
    Ok(NucleusDetection { instances, labels })
}
