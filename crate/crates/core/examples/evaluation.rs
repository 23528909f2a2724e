//! AP at two IoU thresholds and the two-sample KS statistic on toy inputs.

use cytobench::evaluation::{average_precision, ks_statistic, reference, Detection};
use cytobench::geometry::rasterize;
use cytobench::Polygon;

fn main() -> cytobench::Result<()> {
    let (w, h) = (64, 64);
    let mask = |x, y, s| rasterize(&Polygon::rect(x, y, s, s).unwrap(), w, h);
    let gold = vec![mask(4.0, 4.0, 10.0), mask(30.0, 4.0, 10.0), mask(4.0, 30.0, 10.0)];
    let detections = vec![
        // exact hit
        Detection { mask: mask(4.0, 4.0, 10.0), confidence: Some(0.95) },
        // shifted by two pixels: IoU 80/120
        Detection { mask: mask(32.0, 4.0, 10.0), confidence: Some(0.8) },
        // false positive
        Detection { mask: mask(40.0, 40.0, 8.0), confidence: Some(0.7) },
    ];
    for t in [0.5, 0.75] {
        println!("AP{:.0} = {:.2}", t * 100.0, average_precision(&detections, &gold, t)?);
    }

    // integer grids keep the shifted values tied exactly
    let a: Vec<f64> = (0..200).map(f64::from).collect();
    let b: Vec<f64> = a.iter().map(|x| x + 20.0).collect();
    println!("KS D of a uniform grid and its 10% shift: {:.3}", ks_statistic(&a, &b)?);

    println!("\npublished cell AP50:");
    for (name, row) in reference::MODELS.iter().zip(reference::AP) {
        println!("  {name:<18}{:>6.2}", row[2]);
    }
    Ok(())
}
