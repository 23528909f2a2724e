//! Constrained nucleus expansion and the cell AP50 radius sweep.
//!
//! Two nuclei closer than twice the radius stop at their shared frontier
//! instead of overlapping.

use cytobench::expansion::{default_sweep_radii, expand, radius_sweep, SweepPatch};
use cytobench::synthetic::{generate, SyntheticSpec};
use cytobench::Polygon;

fn main() -> cytobench::Result<()> {
    let pair = [Polygon::regular(20.0, 24.0, 4.0, 24)?, Polygon::regular(34.0, 24.0, 4.0, 24)?];
    let grown = expand(&pair, 5.0, (56, 48), 0.5)?;
    for (k, m) in grown.cell_masks.iter().enumerate() {
        println!("cell {k}: {} px, bbox {:?}", m.area(), m.bbox());
    }
    println!("overlap: {} px", grown.cell_masks[0].intersection_area(&grown.cell_masks[1])?);

    let spec = SyntheticSpec::default();
    let patches: Vec<SweepPatch> = (0..4)
        .map(|seed| {
            let s = generate(&spec, seed)?;
            Ok(SweepPatch {
                patch_id: format!("synthetic_{seed}"),
                width: spec.width,
                height: spec.height,
                scale: spec.scale,
                nuclei: s.gold.iter().map(|g| g.nucleus.clone()).collect(),
                gold: s.gold,
            })
        })
        .collect::<cytobench::Result<_>>()?;
    let sweep = radius_sweep(&patches, &default_sweep_radii())?;
    for e in &sweep.entries {
        println!("radius {:>4.1} um  AP50 {:>6.2}", e.radius, e.ap50);
    }
    println!("best: {} um at AP50 {:.2}", sweep.best_radius, sweep.best_ap50);
    Ok(())
}
