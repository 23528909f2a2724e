//! Cell proposals from scaled nucleus boxes: ROI scaling, cytoplasm
//! refinement and the paired mask NMS.

use cytobench::cyto_roi::{pair_and_nms, scale_roi, segment_cells, CytoParams, RoiBox};
use cytobench::dataset::{CellInstance, Source};
use cytobench::stain::{deconvolve, StainProfile};
use cytobench::synthetic::{generate, SyntheticSpec};
use cytobench::watershed::{detect_nuclei, finetuned_params};
use cytobench::Polygon;

fn main() -> cytobench::Result<()> {
    let nucleus = Polygon::rect(30.0, 30.0, 8.0, 6.0)?;
    let roi = RoiBox::from_polygon(&nucleus);
    println!("nucleus box {roi:?}");
    println!("scaled x2   {:?}", scale_roi(roi, 2.0, (64, 64))?);
    println!("near border {:?}", scale_roi(RoiBox::from_polygon(&Polygon::rect(1.0, 1.0, 6.0, 6.0)?), 2.0, (64, 64))?);

    // two proposals for the same nucleus: the lower-scoring one is suppressed
    let mut a = CellInstance::nucleus_only(1, nucleus.clone(), Source::Predicted);
    a.confidence = Some(0.9);
    let mut b = a.clone();
    b.id = 2;
    b.confidence = Some(0.6);
    let cell = Polygon::rect(26.0, 27.0, 16.0, 12.0)?;
    let kept = pair_and_nms(&[a, b], &[cell.clone(), cell], &CytoParams::default(), (64, 64))?;
    println!("NMS keeps ids {:?}", kept.iter().map(|k| k.id).collect::<Vec<_>>());

    let spec = SyntheticSpec::default();
    let sample = generate(&spec, 5)?;
    let profile = StainProfile::reference();
    let conc = deconvolve(&sample.patch, &profile, 255)?;
    let nuclei = detect_nuclei(&sample.patch, &profile, &finetuned_params())?;
    for factor in [1.5, 2.0, 3.0] {
        let params = CytoParams {
            scale_factor: factor,
            ..CytoParams::default()
        };
        let cells = segment_cells(&conc, &nuclei, &params)?;
        let mean_area = cells.iter().map(|c| c.cell.as_ref().map_or(0.0, Polygon::area)).sum::<f64>()
            / cells.len().max(1) as f64;
        println!("factor {factor}: {} cells, mean area {mean_area:.1} px", cells.len());
    }
    Ok(())
}
