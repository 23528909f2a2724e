//! Nucleus-to-cell ROI scaling, cytoplasm refinement, and paired
//! non-maximum suppression.
//!
//! Each nucleus proposal is enlarged about its centre into a cell ROI; a cell
//! mask is grown inside that ROI; nucleus and cell outputs are then filtered
//! together so that every survivor keeps exactly one nucleus and one cell.

use std::collections::VecDeque;

use crate::config::{render, KeyValues};
use crate::dataset::{CellInstance, Source};
use crate::error::{Error, Result};
use crate::geometry::{fill_holes, rasterize, trace_outer, Mask, Polygon};
use crate::stain::ConcentrationMap;

/// Axis-aligned box in pixel coordinates, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl RoiBox {
    pub fn from_polygon(poly: &Polygon) -> Self {
        let (x0, y0, x1, y1) = poly.bounds();
        Self {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Whether the centre of pixel `(px, py)` lies in the box (closed).
    pub fn contains_pixel(&self, px: usize, py: usize) -> bool {
        let (cx, cy) = (px as f64 + 0.5, py as f64 + 0.5);
        cx >= self.x && cx <= self.x + self.w && cy >= self.y && cy <= self.y + self.h
    }
}

/// Scales `roi` about its centre by `factor`, then clips it to `bounds`.
pub fn scale_roi(roi: RoiBox, factor: f64, bounds: (usize, usize)) -> Result<RoiBox> {
    if !(factor >= 1.0 && factor.is_finite()) {
        return Err(Error::InvalidParam(format!("ROI scale factor must be >= 1, got {factor}")));
    }
    let (cx, cy) = roi.center();
    let (hw, hh) = (roi.w * factor / 2.0, roi.h * factor / 2.0);
    let x0 = (cx - hw).max(0.0);
    let y0 = (cy - hh).max(0.0);
    let x1 = (cx + hw).min(bounds.0 as f64);
    let y1 = (cy + hh).min(bounds.1 as f64);
    Ok(RoiBox {
        x: x0,
        y: y0,
        w: (x1 - x0).max(0.0),
        h: (y1 - y0).max(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CytoParams {
    /// Linear ROI enlargement from nucleus to cell, ≥ 1.
    pub scale_factor: f64,
    /// Mask IoU above which a lower-ranked instance is suppressed.
    pub nms_iou_threshold: f64,
    /// Minimum `h + e` concentration of cytoplasm pixels.
    pub tissue_threshold: f64,
}

impl Default for CytoParams {
    fn default() -> Self {
        Self {
            scale_factor: 2.0,
            nms_iou_threshold: 0.3,
            tissue_threshold: 0.05,
        }
    }
}

const KEYS: [&str; 3] = ["scale_factor", "nms_iou_threshold", "tissue_threshold"];

impl CytoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale_factor >= 1.0 && self.scale_factor.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "scale_factor must be >= 1, got {}",
                self.scale_factor
            )));
        }
        if !(self.nms_iou_threshold > 0.0 && self.nms_iou_threshold < 1.0) {
            return Err(Error::InvalidParam(format!(
                "nms_iou_threshold must lie in (0, 1), got {}",
                self.nms_iou_threshold
            )));
        }
        if !self.tissue_threshold.is_finite() {
            return Err(Error::InvalidParam("tissue_threshold must be finite".into()));
        }
        Ok(())
    }

    pub fn from_config(kv: &KeyValues, base: CytoParams) -> Result<Self> {
        let p = CytoParams {
            scale_factor: kv.get("scale_factor")?.unwrap_or(base.scale_factor),
            nms_iou_threshold: kv.get("nms_iou_threshold")?.unwrap_or(base.nms_iou_threshold),
            tissue_threshold: kv.get("tissue_threshold")?.unwrap_or(base.tissue_threshold),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_config_text(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.check_keys(&KEYS)?;
        Self::from_config(&kv, Self::default())
    }

    pub fn to_config(&self) -> String {
        render(&[
            (KEYS[0], self.scale_factor.to_string()),
            (KEYS[1], self.nms_iou_threshold.to_string()),
            (KEYS[2], self.tissue_threshold.to_string()),
        ])
    }

    pub fn config_keys() -> &'static [&'static str] {
        &KEYS
    }
}

/// Grows a cell from `nucleus` through 4-connected pixels inside `cell_roi`
/// whose `h + e` concentration exceeds `tissue_threshold`.
///
/// The result always covers the nucleus mask and never leaves the ROI; when
/// nothing can be grown the nucleus itself is returned.
pub fn refine_cytoplasm(
    conc: &ConcentrationMap,
    nucleus: &Polygon,
    cell_roi: &RoiBox,
    tissue_threshold: f64,
) -> Polygon {
    let (w, h) = (conc.width(), conc.height());
    let seed = rasterize(nucleus, w, h);
    if seed.is_empty() {
        return nucleus.clone();
    }
    let mut inside = vec![false; w * h];
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    for (x, y) in seed.pixels() {
        inside[y * w + x] = true;
        queue.push_back((x, y));
    }
    let growable = |x: usize, y: usize| {
        cell_roi.contains_pixel(x, y) && conc.h.get(x, y) + conc.e.get(x, y) > tissue_threshold
    };
    while let Some((x, y)) = queue.pop_front() {
        let nbrs = [
            (x.wrapping_sub(1), y),
            (x + 1, y),
            (x, y.wrapping_sub(1)),
            (x, y + 1),
        ];
        for (nx, ny) in nbrs {
            if nx < w && ny < h && !inside[ny * w + nx] && growable(nx, ny) {
                inside[ny * w + nx] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    let grown = fill_holes(&Mask::from_fn(w, h, |x, y| inside[y * w + x]));
    if grown.area() == seed.area() {
        return nucleus.clone();
    }
    match trace_outer(&grown) {
        // a split nucleus mask traces to one part only; keep the nucleus then
        Some(cell) if seed.is_subset_of(&rasterize(&cell, w, h)).unwrap_or(false) => cell,
        _ => nucleus.clone(),
    }
}

/// Greedy NMS order: score descending, larger area, lower index.
fn nms_keep(masks: &[Mask], scores: &[f64], threshold: f64) -> Result<Vec<bool>> {
    let mut order: Vec<usize> = (0..masks.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(masks[b].area().cmp(&masks[a].area()))
            .then(a.cmp(&b))
    });
    let mut keep = vec![false; masks.len()];
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let mut suppressed = false;
        for &k in &kept {
            if masks[i].iou(&masks[k])? > threshold {
                suppressed = true;
                break;
            }
        }
        if !suppressed {
            keep[i] = true;
            kept.push(i);
        }
    }
    Ok(keep)
}

/// Pairs `nuclei[i]` with `cells[i]` and runs greedy mask NMS separately on
/// the nucleus and cell masks. An instance survives only if both its nucleus
/// and its cell survive; pairs whose nucleus mask is not inside the cell mask
/// are dropped. Survivors keep input order.
pub fn pair_and_nms(
    nuclei: &[CellInstance],
    cells: &[Polygon],
    params: &CytoParams,
    bounds: (usize, usize),
) -> Result<Vec<CellInstance>> {
    if nuclei.len() != cells.len() {
        return Err(Error::LengthMismatch {
            nuclei: nuclei.len(),
            cells: cells.len(),
        });
    }
    params.validate()?;
    let (w, h) = bounds;
    let n_masks: Vec<Mask> = nuclei.iter().map(|n| rasterize(&n.nucleus, w, h)).collect();
    let c_masks: Vec<Mask> = cells.iter().map(|c| rasterize(c, w, h)).collect();
    let scores: Vec<f64> = nuclei.iter().map(CellInstance::score).collect();
    let keep_n = nms_keep(&n_masks, &scores, params.nms_iou_threshold)?;
    let keep_c = nms_keep(&c_masks, &scores, params.nms_iou_threshold)?;

    let mut out = Vec::new();
    for i in 0..nuclei.len() {
        if !(keep_n[i] && keep_c[i]) {
            continue;
        }
        if !n_masks[i].is_subset_of(&c_masks[i])? {
            log::warn!("dropping instance {}: nucleus not inside its cell", nuclei[i].id);
            continue;
        }
        let mut inst = nuclei[i].clone();
        inst.cell = Some(cells[i].clone());
        out.push(inst);
    }
    Ok(out)
}

/// Full cell branch for one patch: ROI scaling, refinement, paired NMS.
/// Survivors are renumbered `1..=K`.
pub fn segment_cells(
    conc: &ConcentrationMap,
    nuclei: &[CellInstance],
    params: &CytoParams,
) -> Result<Vec<CellInstance>> {
    params.validate()?;
    let bounds = (conc.width(), conc.height());
    let mut cells = Vec::with_capacity(nuclei.len());
    for n in nuclei {
        let roi = scale_roi(RoiBox::from_polygon(&n.nucleus), params.scale_factor, bounds)?;
        cells.push(refine_cytoplasm(conc, &n.nucleus, &roi, params.tissue_threshold));
    }
    let mut out = pair_and_nms(nuclei, &cells, params, bounds)?;
    for (k, inst) in out.iter_mut().enumerate() {
        inst.id = k as u64 + 1;
        inst.source = Source::Predicted;
    }
    Ok(out)
}
