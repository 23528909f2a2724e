//! Paints a synthetic patch with a shifted stain profile, recovers that
//! profile with Macenko estimation, and maps the patch back to the reference.
//!
//! The painted tissue holds only two stain mixtures, nuclei and cytoplasm,
//! and neither is pure eosin, so the percentile extremes land on the
//! mixtures and the eosin estimate leans towards hematoxylin by a few
//! degrees. Real tissue, with a spread of mixtures, fares better.
//!
//! ```text
//! cargo run --release --example stain_normalization
//! ```

use cytobench::stain::{
    deconvolve, estimate_stain_matrix, normalize_to_reference, rgb_to_od, MacenkoParams,
    StainProfile,
};
use cytobench::synthetic::{generate, SyntheticSpec};

fn angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0).acos().to_degrees()
}

fn main() -> cytobench::Result<()> {
    let reference = StainProfile::reference();
    // a bluer hematoxylin and a paler, more orange eosin than the reference
    let scanner = StainProfile::new([0.55, 0.75, 0.37], [0.12, 0.95, 0.28], [1.6, 0.9])?;
    let spec = SyntheticSpec {
        profile: scanner,
        ..SyntheticSpec::default()
    };
    let sample = generate(&spec, 11)?;

    let params = MacenkoParams::default();
    let od = rgb_to_od(&sample.patch, params.background_intensity)?;
    let estimated = estimate_stain_matrix(&od, &params)?;
    println!(
        "hematoxylin: estimated {:.3?}, painted {:.3?}, off by {:.2} deg",
        estimated.hematoxylin,
        scanner.hematoxylin,
        angle_deg(estimated.hematoxylin, scanner.hematoxylin)
    );
    println!(
        "eosin:       estimated {:.3?}, painted {:.3?}, off by {:.2} deg",
        estimated.eosin,
        scanner.eosin,
        angle_deg(estimated.eosin, scanner.eosin)
    );

    let (normalized, _) = normalize_to_reference(&sample.patch, &reference, &params)?;
    let before = deconvolve(&sample.patch, &reference, 255)?;
    let after = deconvolve(&normalized, &reference, 255)?;
    let mean = |g: &cytobench::Grid<f64>| g.data.iter().sum::<f64>() / g.data.len() as f64;
    println!(
        "mean H under the reference profile: {:.3} before, {:.3} after normalization",
        mean(&before.h),
        mean(&after.h)
    );
    Ok(())
}
