//! Seeded synthetic H&E patches with known cell outlines.
//!
//! Cells are non-overlapping ellipses of eosin-stained cytoplasm, each with
//! a darker hematoxylin nucleus, on a white background. Colours follow
//! Beer-Lambert through a chosen [`StainProfile`], so deconvolution with the
//! same profile recovers the painted concentrations up to 8-bit rounding and
//! the added noise.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{export_coco, CellInstance, PatchDescriptor, Source, ANNOTATIONS_FILE};
use crate::error::Result;
use crate::geometry::{rasterize, Polygon};
use crate::patch::{Grid, ImagePatch};
use crate::stain::StainProfile;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    /// µm per pixel.
    pub scale: f64,
    /// Cells attempted; placement stops early when the patch is full.
    pub cells: usize,
    /// Nucleus semi-axis range, pixels.
    pub nucleus_radius: (f64, f64),
    /// Cell semi-axes as a multiple of the nucleus semi-axes.
    pub cell_factor: (f64, f64),
    /// `(h, e)` concentrations of nuclei and cytoplasm.
    pub nucleus_stain: [f64; 2],
    pub cytoplasm_stain: [f64; 2],
    /// Uniform per-channel intensity noise amplitude, 8-bit levels.
    pub noise: u8,
    /// Relative amplitude of the low-frequency boundary ripple; 0 gives
    /// exact ellipses.
    pub wobble: f64,
    pub profile: StainProfile,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            scale: 0.5,
            cells: 12,
            nucleus_radius: (6.0, 9.0),
            cell_factor: (1.6, 2.2),
            nucleus_stain: [0.9, 0.15],
            cytoplasm_stain: [0.08, 0.45],
            noise: 2,
            wobble: 0.12,
            profile: StainProfile::reference(),
        }
    }
}

/// A rendered patch and its whole-cell ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticPatch {
    pub patch: ImagePatch,
    pub gold: Vec<CellInstance>,
}

/// Radial ripple `1 + Σ a_k cos(k t + φ_k)` over harmonics 2 to 5.
type Ripple = [(f64, f64); 4];

fn ripple(rng: &mut ChaCha8Rng, amplitude: f64) -> Ripple {
    let mut out = [(0.0, 0.0); 4];
    for h in &mut out {
        *h = (amplitude * rng.random_range(0.0..=1.0), rng.random_range(0.0..TAU));
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn ellipse(cx: f64, cy: f64, a: f64, b: f64, angle: f64, wave: &Ripple, scale: f64, n: usize) -> Result<Polygon> {
    let (s, c) = angle.sin_cos();
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let t = TAU * k as f64 / n as f64;
            let r = 1.0
                + scale
                    * wave
                        .iter()
                        .enumerate()
                        .map(|(i, (amp, phase))| amp * ((i + 2) as f64 * t + phase).cos())
                        .sum::<f64>();
            let (x, y) = (r * a * t.cos(), r * b * t.sin());
            (cx + x * c - y * s, cy + x * s + y * c)
        })
        .collect();
    Polygon::from_xy(&pts)
}

/// Renders one patch. The same `seed` always gives the same pixels.
pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticPatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (spec.width, spec.height);
    // cell label per pixel, used to reject overlapping placements
    let mut owner = Grid::filled(w, h, 0u32);
    let mut nucleus_px = vec![false; w * h];
    let mut gold = Vec::new();
    let mut attempts = 0;
    while gold.len() < spec.cells && attempts < spec.cells * 50 {
        attempts += 1;
        let a = rng.random_range(spec.nucleus_radius.0..=spec.nucleus_radius.1);
        let b = a * rng.random_range(0.7..=1.0);
        let f = rng.random_range(spec.cell_factor.0..=spec.cell_factor.1);
        let angle = rng.random_range(0.0..TAU);
        let margin = a * f + 1.0;
        if 2.0 * margin >= w.min(h) as f64 {
            continue;
        }
        let cx = rng.random_range(margin..w as f64 - margin);
        let cy = rng.random_range(margin..h as f64 - margin);
        // nuclei sit off-centre inside their cell
        let shift = 0.25 * (f - 1.0) * b;
        let (nx, ny) = (cx + shift * angle.cos(), cy + shift * angle.sin());
        let wave = ripple(&mut rng, spec.wobble);
        let cell = ellipse(cx, cy, a * f, b * f, angle, &wave, 1.0, 64)?;
        // nuclei are smoother than their cells
        let nucleus = ellipse(nx, ny, a, b, angle, &wave, 0.5, 48)?;
        let cell_mask = rasterize(&cell, w, h);
        // keep a one-pixel gap to every earlier cell
        let clash = cell_mask.pixels().any(|(x, y)| {
            (y.saturating_sub(1)..=(y + 1).min(h - 1))
                .any(|yy| (x.saturating_sub(1)..=(x + 1).min(w - 1)).any(|xx| *owner.get(xx, yy) != 0))
        });
        let nucleus_mask = rasterize(&nucleus, w, h);
        if clash || !nucleus_mask.is_subset_of(&cell_mask)? || nucleus_mask.is_empty() {
            continue;
        }
        let label = gold.len() as u32 + 1;
        for (x, y) in cell_mask.pixels() {
            owner.set(x, y, label);
        }
        for (x, y) in nucleus_mask.pixels() {
            nucleus_px[y * w + x] = true;
        }
        gold.push(CellInstance::whole_cell(label as u64, nucleus, cell, Source::Gold));
    }

    let mut pixels = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let conc = if nucleus_px[i] {
                spec.nucleus_stain
            } else if owner.data[i] != 0 {
                spec.cytoplasm_stain
            } else {
                [0.0, 0.0]
            };
            let rgb = spec.profile.compose_rgb(conc, 255);
            for c in rgb {
                let n = spec.noise as i32;
                let jitter = if n > 0 { rng.random_range(-n..=n) } else { 0 };
                pixels.push((c as i32 + jitter).clamp(0, 255) as u8);
            }
        }
    }
    let patch = ImagePatch::new(w, h, pixels, spec.scale)?;
    Ok(SyntheticPatch { patch, gold })
}

/// Writes `<root>/<patient>/<patch>.png` for `patients × patches_per_patient`
/// synthetic patches plus a gold `annotations.json`. Returns the descriptors
/// in file order.
pub fn write_dataset(
    root: &Path,
    spec: &SyntheticSpec,
    patients: usize,
    patches_per_patient: usize,
    seed: u64,
) -> Result<Vec<PatchDescriptor>> {
    let mut descriptors = Vec::new();
    let mut instances = Vec::new();
    for p in 0..patients {
        let patient = format!("P{:02}", p + 1);
        fs::create_dir_all(root.join(&patient))?;
        for k in 0..patches_per_patient {
            let patch_id = format!("{patient}_{:02}", k + 1);
            let sample = generate(spec, seed.wrapping_mul(1_000_003).wrapping_add((p * 1000 + k) as u64))?;
            sample.patch.save_png(&root.join(&patient).join(format!("{patch_id}.png")))?;
            for mut inst in sample.gold {
                inst.id = instances.len() as u64 + 1;
                inst.patch_id = patch_id.clone();
                instances.push(inst);
            }
            descriptors.push(PatchDescriptor {
                image_id: descriptors.len() as u64 + 1,
                file_name: format!("{patient}/{patch_id}.png"),
                width: spec.width,
                height: spec.height,
                patient_id: patient.clone(),
                patch_id,
                scale: spec.scale,
            });
        }
    }
    fs::write(root.join(ANNOTATIONS_FILE), export_coco(&descriptors, &instances))?;
    Ok(descriptors)
}
