//! End to end on synthetic patches: watershed nuclei, expansion and ROI-scaled
//! cells, scored against the painted ground truth.
//!
//! ```text
//! cargo run --release --example pipeline
//! ```

use cytobench::cyto_roi::{segment_cells, CytoParams};
use cytobench::evaluation::{build_report, format_tables, PatchEval};
use cytobench::expansion::expand;
use cytobench::morphometry::feature_record;
use cytobench::stain::{deconvolve, StainProfile};
use cytobench::synthetic::{generate, SyntheticSpec};
use cytobench::watershed::{detect_nuclei, finetuned_params};

fn main() -> cytobench::Result<()> {
    let spec = SyntheticSpec {
        width: 192,
        height: 192,
        cells: 20,
        ..SyntheticSpec::default()
    };
    let profile = StainProfile::reference();
    let params = finetuned_params();

    let mut expanded = Vec::new();
    let mut scaled = Vec::new();
    let (mut feats_gold, mut feats_exp, mut feats_cyto) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..6 {
        let sample = generate(&spec, seed)?;
        let conc = deconvolve(&sample.patch, &profile, 255)?;
        let nuclei = detect_nuclei(&sample.patch, &profile, &params)?;
        println!("patch {seed}: {} gold cells, {} nuclei detected", sample.gold.len(), nuclei.len());

        let polys: Vec<_> = nuclei.iter().map(|n| n.nucleus.clone()).collect();
        let grown = expand(&polys, params.expansion_radius, (spec.width, spec.height), spec.scale)?.cells;
        let cells = segment_cells(&conc, &nuclei, &CytoParams::default())?;

        for (dst, src) in [(&mut feats_gold, &sample.gold), (&mut feats_exp, &grown), (&mut feats_cyto, &cells)] {
            for inst in src {
                if let Ok(r) = feature_record(inst, &conc, spec.scale) {
                    dst.push(r);
                }
            }
        }
        let patch_eval = |predicted| PatchEval {
            patch_id: format!("synthetic_{seed}"),
            width: spec.width,
            height: spec.height,
            predicted,
            gold: sample.gold.clone(),
        };
        expanded.push(patch_eval(grown));
        scaled.push(patch_eval(cells));
    }

    let reports = [
        build_report("expansion 5um", &expanded, &feats_exp, &feats_gold)?,
        build_report("ROI x2 + NMS", &scaled, &feats_cyto, &feats_gold)?,
    ];
    println!("\n{}", format_tables(&reports));
    Ok(())
}
