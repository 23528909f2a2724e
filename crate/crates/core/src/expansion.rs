//! Constrained nucleus expansion: every background pixel within the
//! expansion radius of a nucleus joins its nearest nucleus, so neighbouring
//! cells stop growing where their fronts meet.

use serde::{Deserialize, Serialize};

use crate::dataset::{CellInstance, Source};
use crate::edt::squared_edt;
use crate::error::{Error, Result};
use crate::evaluation::{average_precision_multi, Detection, ImageInstances};
use crate::geometry::{components, rasterize, trace_outer, Mask, Polygon};
use crate::patch::Grid;

#[derive(Debug, Clone)]
pub struct ExpansionResult {
    /// One per input nucleus, in input order.
    pub cells: Vec<CellInstance>,
    /// µm
    pub radius: f64,
    /// Cell label per pixel: `k + 1` for the cell grown from nucleus `k`.
    pub labels: Grid<u32>,
    /// Pixel mask of every cell, in input order.
    pub cell_masks: Vec<Mask>,
}

/// Grows each nucleus by `radius` µm on the pixel grid of `bounds`.
///
/// A pixel joins nucleus `k` when its squared distance to `k`'s mask is at
/// most `(radius / scale)²` and is smaller than to every other nucleus;
/// exact ties go to the lower index. Growth is clipped at the patch border.
pub fn expand(
    nuclei: &[Polygon],
    radius: f64,
    bounds: (usize, usize),
    scale: f64,
) -> Result<ExpansionResult> {
    if !(radius >= 0.0) || !(scale > 0.0) {
        return Err(Error::InvalidParam(format!(
            "expansion needs radius >= 0 and scale > 0, got {radius}, {scale}"
        )));
    }
    let (w, h) = bounds;
    let masks: Vec<Mask> = nuclei.iter().map(|p| rasterize(p, w, h)).collect();
    for i in 0..masks.len() {
        for j in i + 1..masks.len() {
            if masks[i].intersection_area(&masks[j])? > 0 {
                return Err(Error::OverlappingNuclei(i, j));
            }
        }
    }

    let r_px = radius / scale;
    let limit = r_px * r_px;
    let reach = r_px.floor() as usize;
    let mut best_d = vec![f64::INFINITY; w * h];
    let mut labels = Grid::filled(w, h, 0u32);
    for (k, mask) in masks.iter().enumerate() {
        let (x0, y0, mw, mh) = mask.bbox();
        if mw == 0 {
            continue;
        }
        // window beyond which every pixel is farther than the radius
        let wx0 = x0.saturating_sub(reach);
        let wy0 = y0.saturating_sub(reach);
        let wx1 = (x0 + mw + reach).min(w);
        let wy1 = (y0 + mh + reach).min(h);
        let (ww, wh) = (wx1 - wx0, wy1 - wy0);
        let features: Vec<bool> = (0..ww * wh)
            .map(|i| mask.get(wx0 + i % ww, wy0 + i / ww))
            .collect();
        let dist = squared_edt(ww, wh, &features);
        for wy in 0..wh {
            for wx in 0..ww {
                let d = *dist.get(wx, wy);
                if d > limit + 1e-9 {
                    continue;
                }
                let i = (wy0 + wy) * w + (wx0 + wx);
                // strict: earlier (lower-index) nuclei keep ties
                if d < best_d[i] {
                    best_d[i] = d;
                    labels.data[i] = k as u32 + 1;
                }
            }
        }
    }

    let mut per_cell: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nuclei.len()];
    for (i, &l) in labels.data.iter().enumerate() {
        if l != 0 {
            per_cell[l as usize - 1].push((i % w, i / w));
        }
    }
    let mut cells = Vec::with_capacity(nuclei.len());
    let mut cell_masks = Vec::with_capacity(nuclei.len());
    for (k, (nucleus, px)) in nuclei.iter().zip(per_cell).enumerate() {
        let mask = Mask::from_pixels(w, h, px);
        let outline = outline_of(&mask, &masks[k]).unwrap_or_else(|| nucleus.clone());
        cells.push(CellInstance::whole_cell(
            k as u64 + 1,
            nucleus.clone(),
            outline,
            Source::Predicted,
        ));
        cell_masks.push(mask);
    }
    Ok(ExpansionResult {
        cells,
        radius,
        labels,
        cell_masks,
    })
}

/// Outline of the 4-connected component of `cell` holding most of `nucleus`.
fn outline_of(cell: &Mask, nucleus: &Mask) -> Option<Polygon> {
    let parts = components(cell);
    let best = parts.iter().max_by_key(|c| {
        let overlap = nucleus.pixels().filter(|&(x, y)| c.get(x, y)).count();
        (overlap, c.area())
    })?;
    trace_outer(best)
}

/// Nuclei and gold cells of one patch for a radius sweep.
#[derive(Debug, Clone)]
pub struct SweepPatch {
    pub patch_id: String,
    pub width: usize,
    pub height: usize,
    pub scale: f64,
    pub nuclei: Vec<Polygon>,
    pub gold: Vec<CellInstance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub radius: f64,
    pub ap50: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    pub best_radius: f64,
    pub best_ap50: f64,
}

/// `0.5, 1.0, …, 10.0` µm.
pub fn default_sweep_radii() -> Vec<f64> {
    (1..=20).map(|k| k as f64 * 0.5).collect()
}

/// Expands at every radius, scores cell AP50 against the gold cells, and
/// returns the argmax (ties → smaller radius).
pub fn radius_sweep(patches: &[SweepPatch], radii: &[f64]) -> Result<SweepResult> {
    if radii.is_empty() {
        return Err(Error::InvalidParam("radius sweep needs at least one radius".into()));
    }
    let gold_masks: Vec<Vec<Mask>> = patches
        .iter()
        .map(|p| {
            p.gold
                .iter()
                .filter_map(|g| g.cell.as_ref())
                .map(|c| rasterize(c, p.width, p.height))
                .collect()
        })
        .collect();
    if gold_masks.iter().all(Vec::is_empty) {
        return Err(Error::EmptyGold);
    }
    let mut radii = radii.to_vec();
    radii.sort_by(f64::total_cmp);

    let mut entries = Vec::with_capacity(radii.len());
    for &radius in &radii {
        let mut images = Vec::with_capacity(patches.len());
        for (p, gold) in patches.iter().zip(&gold_masks) {
            let res = expand(&p.nuclei, radius, (p.width, p.height), p.scale)?;
            images.push(ImageInstances {
                detections: res
                    .cell_masks
                    .into_iter()
                    .map(|mask| Detection { mask, confidence: None })
                    .collect(),
                gold: gold.clone(),
            });
        }
        let ap50 = average_precision_multi(&images, 0.5)?;
        entries.push(SweepEntry { radius, ap50 });
    }
    SweepResult::from_entries(entries)
}

impl SweepResult {
    /// Sorts entries by radius and picks the best AP50 (ties → smaller radius).
    pub fn from_entries(mut entries: Vec<SweepEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParam("radius sweep needs at least one radius".into()));
        }
        entries.sort_by(|a, b| a.radius.total_cmp(&b.radius));
        let best = entries
            .iter()
            .fold(entries[0], |best, e| if e.ap50 > best.ap50 { *e } else { best });
        Ok(SweepResult {
            best_radius: best.radius,
            best_ap50: best.ap50,
            entries,
        })
    }
}
