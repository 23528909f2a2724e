//! Shape and stain features of a few reference shapes and a synthetic cell.

use cytobench::morphometry::{calipers_diameters, feature_record, shape_features, FEATURE_NAMES};
use cytobench::stain::{deconvolve, StainProfile};
use cytobench::synthetic::{generate, SyntheticSpec};
use cytobench::Polygon;

fn main() -> cytobench::Result<()> {
    let star: Vec<(f64, f64)> = (0..10)
        .map(|k| {
            let t = std::f64::consts::PI * k as f64 / 5.0;
            let r = if k % 2 == 0 { 10.0 } else { 4.0 };
            (r * t.sin(), -r * t.cos())
        })
        .collect();
    let shapes = [
        ("unit square", Polygon::rect(0.0, 0.0, 1.0, 1.0)?),
        ("3x1 rectangle", Polygon::rect(0.0, 0.0, 3.0, 1.0)?),
        ("64-gon", Polygon::regular(0.0, 0.0, 10.0, 64)?),
        ("star", Polygon::from_xy(&star)?),
    ];
    println!("{:<14}{:>9}{:>10}{:>8}{:>9}{:>8}{:>8}", "shape", "area", "perimeter", "circ", "solidity", "max d", "min d");
    for (name, p) in &shapes {
        let f = shape_features(p, 1.0)?;
        let (min_d, max_d) = calipers_diameters(p, 1.0)?;
        println!(
            "{name:<14}{:>9.3}{:>10.3}{:>8.4}{:>9.4}{:>8.3}{:>8.3}",
            f.area, f.perimeter, f.circularity, f.solidity, max_d, min_d
        );
    }

    let spec = SyntheticSpec::default();
    let sample = generate(&spec, 2)?;
    let conc = deconvolve(&sample.patch, &StainProfile::reference(), 255)?;
    let record = feature_record(&sample.gold[0], &conc, spec.scale)?;
    println!("\nfirst painted cell:");
    for (name, v) in FEATURE_NAMES.iter().zip(record.values()) {
        println!("  {name:<20}{v:.4}");
    }
    Ok(())
}
