//! Watershed nucleus detection with the default and finetuned presets,
//! scored as nucleus AP against the painted nuclei.

use cytobench::evaluation::{average_precision_multi, Detection, ImageInstances};
use cytobench::geometry::rasterize;
use cytobench::stain::StainProfile;
use cytobench::synthetic::{generate, SyntheticSpec};
use cytobench::watershed::{default_params, detect_nuclei, finetuned_params};

fn main() -> cytobench::Result<()> {
    let spec = SyntheticSpec {
        width: 160,
        height: 160,
        cells: 16,
        ..SyntheticSpec::default()
    };
    let samples: Vec<_> = (0..4).map(|s| generate(&spec, 100 + s)).collect::<Result<_, _>>()?;

    for (name, params) in [("default", default_params()), ("finetuned", finetuned_params())] {
        let mut images = Vec::new();
        let mut found = 0;
        for s in &samples {
            let nuclei = detect_nuclei(&s.patch, &StainProfile::reference(), &params)?;
            found += nuclei.len();
            images.push(ImageInstances {
                detections: nuclei
                    .iter()
                    .map(|n| Detection {
                        mask: rasterize(&n.nucleus, spec.width, spec.height),
                        confidence: n.confidence,
                    })
                    .collect(),
                gold: s.gold.iter().map(|g| rasterize(&g.nucleus, spec.width, spec.height)).collect(),
            });
        }
        let gold: usize = samples.iter().map(|s| s.gold.len()).sum();
        println!(
            "{name:>9}: {found} nuclei for {gold} painted, AP50 {:.2}, AP75 {:.2}",
            average_precision_multi(&images, 0.5)?,
            average_precision_multi(&images, 0.75)?
        );
    }
    Ok(())
}
