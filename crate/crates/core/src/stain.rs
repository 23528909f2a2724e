//! Optical density, Macenko stain estimation, normalization and colour
//! deconvolution for H&E patches.
//!
//! Stain vectors live in OD space with channels ordered R, G, B. Column 0 of
//! a stain matrix is hematoxylin, column 1 is eosin.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patch::{Grid, ImagePatch};

pub type OdRaster = Grid<[f64; 3]>;

/// Macenko estimation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacenkoParams {
    /// Pixels whose OD vector norm is below this are treated as background.
    pub beta: f64,
    /// Angular percentile (and its complement) picking the extreme stain directions.
    pub alpha_percentile: f64,
    pub background_intensity: u8,
    pub min_tissue_pixels: usize,
}

impl Default for MacenkoParams {
    fn default() -> Self {
        Self {
            beta: 0.15,
            alpha_percentile: 1.0,
            background_intensity: 255,
            min_tissue_pixels: 100,
        }
    }
}

/// Estimated H&E stain vectors and concentration scaling of one patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StainProfile {
    /// Unit OD vector (R, G, B) of hematoxylin.
    pub hematoxylin: [f64; 3],
    /// Unit OD vector (R, G, B) of eosin.
    pub eosin: [f64; 3],
    /// 99th-percentile concentration per stain (hematoxylin, eosin).
    pub max_concentrations: [f64; 2],
}

impl StainProfile {
    /// Builds a profile, normalizing both stain vectors to unit length.
    pub fn new(hematoxylin: [f64; 3], eosin: [f64; 3], max_concentrations: [f64; 2]) -> Result<Self> {
        let profile = Self {
            hematoxylin: unit(hematoxylin)?,
            eosin: unit(eosin)?,
            max_concentrations,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Fixed reference the patches are normalized to.
    pub fn reference() -> Self {
        Self::new([0.65, 0.70, 0.29], [0.07, 0.99, 0.11], [1.9705, 1.0308])
            .expect("reference profile is valid")
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("hematoxylin", self.hematoxylin), ("eosin", self.eosin)] {
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParam(format!("{name} vector norm {norm}")));
            }
            if v.iter().any(|&c| c < 0.0) {
                return Err(Error::InvalidParam(format!("{name} vector has negative entries")));
            }
        }
        if !self.max_concentrations.iter().all(|&m| m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "max concentrations must be > 0, got {:?}",
                self.max_concentrations
            )));
        }
        Ok(())
    }

    fn matrix(&self) -> [[f64; 3]; 2] {
        [self.hematoxylin, self.eosin]
    }

    /// Least-squares unmixing operator `(MᵀM)⁻¹Mᵀ`, rows for H and E.
    pub fn unmixing(&self) -> Result<[[f64; 3]; 2]> {
        unmixing_matrix(self.hematoxylin, self.eosin)
    }

    /// OD produced by concentrations `(h, e)`.
    pub fn compose_od(&self, conc: [f64; 2]) -> [f64; 3] {
        let m = self.matrix();
        std::array::from_fn(|c| m[0][c] * conc[0] + m[1][c] * conc[1])
    }

    /// 8-bit RGB produced by concentrations `(h, e)` under Beer-Lambert.
    pub fn compose_rgb(&self, conc: [f64; 2], background_intensity: u8) -> [u8; 3] {
        let od = self.compose_od(conc);
        od.map(|v| od_to_intensity(v, background_intensity))
    }
}

fn unit(v: [f64; 3]) -> Result<[f64; 3]> {
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidParam(format!("stain vector {v:?} has no direction")));
    }
    Ok(v.map(|c| c / norm))
}

fn unmixing_matrix(h: [f64; 3], e: [f64; 3]) -> Result<[[f64; 3]; 2]> {
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let (hh, he, ee) = (dot(h, h), dot(h, e), dot(e, e));
    let det = hh * ee - he * he;
    if det.abs() < 1e-9 * hh * ee {
        return Err(Error::DegenerateStainMatrix(
            "hematoxylin and eosin vectors are collinear".into(),
        ));
    }
    let inv = [[ee / det, -he / det], [-he / det, hh / det]];
    Ok([
        std::array::from_fn(|c| inv[0][0] * h[c] + inv[0][1] * e[c]),
        std::array::from_fn(|c| inv[1][0] * h[c] + inv[1][1] * e[c]),
    ])
}

/// `OD = -log10((I + 1) / (background + 1))`.
pub fn intensity_to_od(intensity: u8, background_intensity: u8) -> f64 {
    -((intensity as f64 + 1.0) / (background_intensity as f64 + 1.0)).log10()
}

/// Inverse of [`intensity_to_od`], rounded and clamped to 8 bits.
pub fn od_to_intensity(od: f64, background_intensity: u8) -> u8 {
    let i = (background_intensity as f64 + 1.0) * 10f64.powf(-od) - 1.0;
    i.round().clamp(0.0, 255.0) as u8
}

pub fn rgb_to_od(patch: &ImagePatch, background_intensity: u8) -> Result<OdRaster> {
    if background_intensity == 0 {
        return Err(Error::InvalidParam("background intensity must be in [1, 255]".into()));
    }
    // 256-entry lookup; every channel shares the same curve
    let lut: Vec<f64> = (0..=255u8)
        .map(|i| intensity_to_od(i, background_intensity))
        .collect();
    let data = patch
        .rgb_iter()
        .map(|p| p.map(|c| lut[c as usize]))
        .collect();
    Grid::from_vec(patch.width(), patch.height(), data)
}

/// Nearest-rank percentile (`q` in [0, 100]) of an ascending-sorted slice.
///
/// Nearest-rank picks an order statistic by `ceil(q/100 * n)`, so repeating
/// every sample k times leaves the result unchanged.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

fn percentile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    percentile_sorted(values, q)
}

/// Macenko stain-matrix estimation.
///
/// Tissue pixels (OD norm ≥ `beta`) are projected onto the plane of the two
/// leading principal directions of their OD covariance; the directions at the
/// `alpha` and `100 - alpha` angle percentiles in that plane become the stain
/// vectors. The one with the larger red-channel OD is hematoxylin.
pub fn estimate_stain_matrix(od: &OdRaster, params: &MacenkoParams) -> Result<StainProfile> {
    let tissue: Vec<[f64; 3]> = od
        .data
        .iter()
        .copied()
        .filter(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() >= params.beta)
        .collect();
    if tissue.len() < params.min_tissue_pixels.max(2) {
        return Err(Error::NoTissue {
            found: tissue.len(),
            required: params.min_tissue_pixels,
        });
    }

    let n = tissue.len() as f64;
    let mean: [f64; 3] = std::array::from_fn(|c| tissue.iter().map(|v| v[c]).sum::<f64>() / n);
    let mut cov = Matrix3::<f64>::zeros();
    for v in &tissue {
        let d = Vector3::new(v[0] - mean[0], v[1] - mean[1], v[2] - mean[2]);
        cov += d * d.transpose();
    }
    cov /= n;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut e1: [f64; 3] = std::array::from_fn(|c| eig.eigenvectors[(c, order[0])]);
    let mut e2: [f64; 3] = std::array::from_fn(|c| eig.eigenvectors[(c, order[1])]);
    // orient the principal axes so that tissue projects positively on average
    for e in [&mut e1, &mut e2] {
        let proj: f64 = mean.iter().zip(e.iter()).map(|(m, v)| m * v).sum();
        if proj < 0.0 || (proj == 0.0 && e.iter().sum::<f64>() < 0.0) {
            *e = e.map(|v| -v);
        }
    }

    let mut angles: Vec<f64> = tissue
        .iter()
        .map(|v| {
            let t1 = v[0] * e1[0] + v[1] * e1[1] + v[2] * e1[2];
            let t2 = v[0] * e2[0] + v[1] * e2[1] + v[2] * e2[2];
            t2.atan2(t1)
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    let phi_min = percentile_sorted(&angles, params.alpha_percentile);
    let phi_max = percentile_sorted(&angles, 100.0 - params.alpha_percentile);
    let direction = |phi: f64| -> [f64; 3] {
        let v: [f64; 3] = std::array::from_fn(|c| e1[c] * phi.cos() + e2[c] * phi.sin());
        let v = if v.iter().sum::<f64>() < 0.0 { v.map(|x| -x) } else { v };
        v.map(|x| x.max(0.0))
    };
    let (va, vb) = (direction(phi_min), direction(phi_max));
    let (h, e) = if va[0] >= vb[0] { (va, vb) } else { (vb, va) };
    let (h, e) = (
        unit(h).map_err(|_| Error::DegenerateStainMatrix("empty hematoxylin direction".into()))?,
        unit(e).map_err(|_| Error::DegenerateStainMatrix("empty eosin direction".into()))?,
    );

    let unmix = unmixing_matrix(h, e)?;
    let (mut ch, mut ce): (Vec<f64>, Vec<f64>) = tissue
        .iter()
        .map(|v| (dot3(unmix[0], *v), dot3(unmix[1], *v)))
        .unzip();
    let max_concentrations = [percentile(&mut ch, 99.0), percentile(&mut ce, 99.0)];
    if !max_concentrations.iter().all(|&m| m > 0.0) {
        return Err(Error::DegenerateStainMatrix(format!(
            "non-positive 99th-percentile concentrations {max_concentrations:?}"
        )));
    }
    Ok(StainProfile {
        hematoxylin: h,
        eosin: e,
        max_concentrations,
    })
}

#[inline]
fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Hematoxylin and eosin concentration channels of a patch.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationMap {
    pub h: Grid<f64>,
    pub e: Grid<f64>,
}

impl ConcentrationMap {
    pub fn width(&self) -> usize {
        self.h.width
    }

    pub fn height(&self) -> usize {
        self.h.height
    }

    /// Copy with negative concentrations set to zero.
    pub fn clamped(&self) -> ConcentrationMap {
        ConcentrationMap {
            h: self.h.map(|v| v.max(0.0)),
            e: self.e.map(|v| v.max(0.0)),
        }
    }
}

/// Per-pixel least-squares unmixing. Concentrations are left unclamped, so
/// pixels slightly off the stain plane can report small negative values.
pub fn deconvolve(
    patch: &ImagePatch,
    profile: &StainProfile,
    background_intensity: u8,
) -> Result<ConcentrationMap> {
    let unmix = profile.unmixing()?;
    let od = rgb_to_od(patch, background_intensity)?;
    let (w, hgt) = (od.width, od.height);
    let h = od.data.iter().map(|v| dot3(unmix[0], *v)).collect();
    let e = od.data.iter().map(|v| dot3(unmix[1], *v)).collect();
    Ok(ConcentrationMap {
        h: Grid::from_vec(w, hgt, h)?,
        e: Grid::from_vec(w, hgt, e)?,
    })
}

/// Maps `patch` from its own stain space (`source`) into `reference`.
///
/// Concentrations are unmixed with `source`, clamped at zero, rescaled by the
/// ratio of 99th-percentile maxima, and recomposed through the reference
/// stain vectors.
pub fn normalize(
    patch: &ImagePatch,
    source: &StainProfile,
    reference: &StainProfile,
    background_intensity: u8,
) -> Result<ImagePatch> {
    source.validate()?;
    reference.validate()?;
    let unmix = source.unmixing()?;
    let ratio = [
        reference.max_concentrations[0] / source.max_concentrations[0],
        reference.max_concentrations[1] / source.max_concentrations[1],
    ];
    let lut: Vec<f64> = (0..=255u8)
        .map(|i| intensity_to_od(i, background_intensity))
        .collect();
    let mut out = Vec::with_capacity(patch.pixels().len());
    for px in patch.rgb_iter() {
        let od = px.map(|c| lut[c as usize]);
        let c = [
            dot3(unmix[0], od).max(0.0) * ratio[0],
            dot3(unmix[1], od).max(0.0) * ratio[1],
        ];
        out.extend_from_slice(&reference.compose_rgb(c, background_intensity));
    }
    let mut normalized = ImagePatch::new(patch.width(), patch.height(), out, patch.scale())?;
    normalized.patient_id = patch.patient_id.clone();
    normalized.patch_id = patch.patch_id.clone();
    Ok(normalized)
}

/// Estimates the patch's own profile and normalizes it to `reference`.
pub fn normalize_to_reference(
    patch: &ImagePatch,
    reference: &StainProfile,
    params: &MacenkoParams,
) -> Result<(ImagePatch, StainProfile)> {
    let od = rgb_to_od(patch, params.background_intensity)?;
    let source = estimate_stain_matrix(&od, params)?;
    let normalized = normalize(patch, &source, reference, params.background_intensity)?;
    Ok((normalized, source))
}
