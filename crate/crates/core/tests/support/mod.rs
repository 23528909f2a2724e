//! Generators and brute-force oracles shared by the integration tests.
//!
//! Each `*_suite` runs one property over `cases` generated inputs with a
//! deterministic RNG and returns the first counterexample as an error.

#![allow(dead_code)]

use std::f64::consts::PI;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use cytobench::evaluation::{average_precision_multi, ks_statistic, Detection, ImageInstances};
use cytobench::expansion::expand;
use cytobench::geometry::{convex_hull, rasterize, rotating_calipers};
use cytobench::morphometry::{calipers_diameters, shape_features};
use cytobench::patch::Grid;
use cytobench::stain::{estimate_stain_matrix, MacenkoParams, StainProfile};
use cytobench::{Mask, Point, Polygon};

pub fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- AP

pub const AP_GRID: usize = 16;

/// `(x, y, w, h)` of an axis-aligned box on the AP grid.
pub type Rect = (usize, usize, usize, usize);

pub fn rect_strategy() -> impl Strategy<Value = Rect> {
    (0..12usize, 0..12usize, 1..7usize, 1..7usize)
}

pub fn rect_mask(r: Rect) -> Mask {
    Mask::from_fn(AP_GRID, AP_GRID, |x, y| {
        x >= r.0 && x < r.0 + r.2 && y >= r.1 && y < r.1 + r.3
    })
}

/// Detections (box, optional confidence from a small set so ties happen)
/// and gold boxes of one image.
pub type ApImage = (Vec<(Rect, Option<u8>)>, Vec<Rect>);

pub fn ap_image_strategy() -> impl Strategy<Value = ApImage> {
    (
        prop::collection::vec((rect_strategy(), prop::option::of(0..4u8)), 0..=5),
        prop::collection::vec(rect_strategy(), 0..=5),
    )
}

fn confidence(c: Option<u8>) -> Option<f64> {
    c.map(|k| [0.2, 0.5, 0.7, 0.9][k as usize])
}

pub fn to_instances(images: &[ApImage]) -> Vec<ImageInstances> {
    images
        .iter()
        .map(|(dets, gold)| ImageInstances {
            detections: dets
                .iter()
                .map(|&(r, c)| Detection {
                    mask: rect_mask(r),
                    confidence: confidence(c),
                })
                .collect(),
            gold: gold.iter().map(|&r| rect_mask(r)).collect(),
        })
        .collect()
}

fn brute_iou(a: Rect, b: Rect) -> f64 {
    let (ma, mb) = (rect_mask(a), rect_mask(b));
    let (mut inter, mut union) = (0usize, 0usize);
    for y in 0..AP_GRID {
        for x in 0..AP_GRID {
            let (p, q) = (ma.get(x, y), mb.get(x, y));
            inter += (p && q) as usize;
            union += (p || q) as usize;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Straight-line reading of COCO evaluation: greedy per-image matching in
/// ranking order, one global ranking, and the 101 recall points each taking
/// the best precision at any rank reaching that recall.
pub fn oracle_ap(images: &[ApImage], threshold: f64) -> Option<f64> {
    let num_gold: usize = images.iter().map(|im| im.1.len()).sum();
    if num_gold == 0 {
        return None;
    }
    // (score, area, image, index, tp)
    let mut ranked = Vec::new();
    for (i, (dets, gold)) in images.iter().enumerate() {
        let key = |d: usize| {
            let (r, c) = dets[d];
            (confidence(c).unwrap_or(1.0), r.2 * r.3)
        };
        let mut order: Vec<usize> = (0..dets.len()).collect();
        // insertion sort keeps the lower index first among equal keys
        for a in 1..order.len() {
            let mut b = a;
            while b > 0 {
                let (s0, a0) = key(order[b - 1]);
                let (s1, a1) = key(order[b]);
                if s1 > s0 || (s1 == s0 && a1 > a0) {
                    order.swap(b - 1, b);
                    b -= 1;
                } else {
                    break;
                }
            }
        }
        let mut taken = vec![false; gold.len()];
        for d in order {
            let mut best: Option<(usize, f64)> = None;
            for g in 0..gold.len() {
                let iou = brute_iou(dets[d].0, gold[g]);
                if !taken[g] && iou >= threshold && best.map_or(true, |(_, b)| iou > b) {
                    best = Some((g, iou));
                }
            }
            if let Some((g, _)) = best {
                taken[g] = true;
            }
            let (s, a) = key(d);
            ranked.push((s, a, i, d, best.is_some()));
        }
    }
    ranked.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap()
            .then(y.1.cmp(&x.1))
            .then(x.2.cmp(&y.2))
            .then(x.3.cmp(&y.3))
    });
    let mut points = Vec::new();
    let mut tp = 0usize;
    for (k, r) in ranked.iter().enumerate() {
        tp += r.4 as usize;
        points.push((tp as f64 / num_gold as f64, tp as f64 / (k + 1) as f64));
    }
    let mut sum = 0.0;
    for k in 0..=100 {
        let level = k as f64 / 100.0;
        let best = points
            .iter()
            .filter(|(recall, _)| *recall >= level)
            .map(|p| p.1)
            .fold(0.0, f64::max);
        sum += best;
    }
    Some(100.0 * sum / 101.0)
}

pub fn ap_suite(cases: u32) -> Result<(), String> {
    let strategy = prop::collection::vec(ap_image_strategy(), 1..=3);
    run(cases, strategy, |images| {
        let inst = to_instances(&images);
        let mut at = Vec::new();
        for t in [0.5, 0.75] {
            let got = average_precision_multi(&inst, t);
            match oracle_ap(&images, t) {
                None => check(got.is_err(), || "empty gold must be an error".into())?,
                Some(want) => {
                    let got = got.map_err(|e| TestCaseError::fail(e.to_string()))?;
                    check((got - want).abs() <= 1e-9, || format!("AP{t}: engine {got}, oracle {want}"))?;
                    check((0.0..=100.0).contains(&got), || format!("AP {got} out of range"))?;
                    at.push(got);
                }
            }
        }
        if let [ap50, ap75] = at[..] {
            check(ap75 <= ap50, || format!("AP75 {ap75} > AP50 {ap50}"))?;
        }
        Ok(())
    })
}

// ---------------------------------------------------------------- KS

/// Samples on a half-integer lattice so ties within and across samples are
/// common.
pub fn ks_sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-12i32..=12).prop_map(|k| k as f64 / 2.0), 1..=50)
}

/// Largest gap between the two empirical CDFs, evaluated at every pooled
/// value by counting.
pub fn oracle_ks(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    a.iter()
        .chain(b)
        .map(|&x| (cdf(a, x) - cdf(b, x)).abs())
        .fold(0.0, f64::max)
}

pub fn ks_suite(cases: u32) -> Result<(), String> {
    run(cases, (ks_sample(), ks_sample()), |(a, b)| {
        let d = ks_statistic(&a, &b).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let want = oracle_ks(&a, &b);
        check(d == want, || format!("engine {d}, oracle {want}"))?;
        let swapped = ks_statistic(&b, &a).unwrap();
        check(swapped == d, || format!("asymmetric: {d} vs {swapped}"))?;
        let ea: Vec<f64> = a.iter().map(|v| v.exp()).collect();
        let eb: Vec<f64> = b.iter().map(|v| v.exp()).collect();
        let de = ks_statistic(&ea, &eb).unwrap();
        check(de == d, || format!("exp changed D: {d} vs {de}"))?;
        check((0.0..=1.0).contains(&d), || format!("D {d} out of range"))
    })
}

// ---------------------------------------------------------------- calipers

/// Integer-coordinate convex polygons with 3 to 30 vertices: points on a
/// circle, rounded, then hulled. Integer coordinates keep every cross
/// product exact.
pub fn convex_strategy() -> impl Strategy<Value = Vec<Point>> {
    (50.0..2000.0f64, 0.3..1.0f64, prop::collection::vec(0.0..(2.0 * PI), 3..=30)).prop_map(
        |(r, squash, angles)| {
            let pts: Vec<Point> = angles
                .iter()
                .map(|t| Point::new((r * t.cos()).round(), (r * squash * t.sin()).round()))
                .collect();
            convex_hull(&pts)
        },
    )
}

pub fn oracle_calipers(hull: &[Point]) -> (f64, f64) {
    let mut diam2 = 0.0f64;
    for p in hull {
        for q in hull {
            diam2 = diam2.max((p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y));
        }
    }
    let n = hull.len();
    let mut width = f64::INFINITY;
    for i in 0..n {
        let (a, b) = (hull[i], hull[(i + 1) % n]);
        let len = ((b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y)).sqrt();
        let far = hull
            .iter()
            .map(|p| ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)).abs() / len)
            .fold(0.0, f64::max);
        width = width.min(far);
    }
    (diam2.sqrt(), width)
}

pub fn calipers_suite(cases: u32) -> Result<(), String> {
    run(cases, convex_strategy(), |hull| {
        if hull.len() < 3 {
            return Err(TestCaseError::reject("degenerate hull"));
        }
        let (diameter, width) = oracle_calipers(&hull);
        let c = rotating_calipers(&hull);
        check(c.diameter == diameter, || format!("diameter {} vs oracle {diameter}", c.diameter))?;
        check(c.width == width, || format!("width {} vs oracle {width}", c.width))?;
        let poly = Polygon::new(hull.clone()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let (min_d, max_d) = calipers_diameters(&poly, 1.0).unwrap();
        check(max_d == diameter && min_d == width, || {
            format!("polygon calipers ({min_d}, {max_d}) vs oracle ({width}, {diameter})")
        })
    })
}

// ---------------------------------------------------------------- expansion

pub const LAYOUT: (usize, usize) = (48, 48);
pub const LAYOUT_SCALE: f64 = 0.5;

/// Up to six disk nuclei (16-gons); later disks overlapping earlier ones
/// are dropped.
pub fn layout_strategy() -> impl Strategy<Value = Vec<Polygon>> {
    prop::collection::vec((4.0..44.0f64, 4.0..44.0f64, 1.5..5.0f64), 1..=6).prop_map(|disks| {
        let mut kept: Vec<(Polygon, Mask)> = Vec::new();
        for (x, y, r) in disks {
            let p = Polygon::regular(x, y, r, 16).unwrap();
            let m = rasterize(&p, LAYOUT.0, LAYOUT.1);
            if !m.is_empty() && kept.iter().all(|(_, k)| k.intersection_area(&m).unwrap() == 0) {
                kept.push((p, m));
            }
        }
        kept.into_iter().map(|(p, _)| p).collect()
    })
}

pub fn expansion_suite(cases: u32) -> Result<(), String> {
    let strategy = (layout_strategy(), 0.0..6.0f64, 0.0..3.0f64);
    run(cases, strategy, |(nuclei, r1, dr)| {
        let (w, h) = LAYOUT;
        let small = expand(&nuclei, r1, LAYOUT, LAYOUT_SCALE).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let large = expand(&nuclei, r1 + dr, LAYOUT, LAYOUT_SCALE).unwrap();
        for res in [&small, &large] {
            let outlines: Vec<Mask> = res
                .cells
                .iter()
                .map(|c| rasterize(c.cell.as_ref().unwrap(), w, h))
                .collect();
            for k in 0..nuclei.len() {
                let nucleus = rasterize(&nuclei[k], w, h);
                check(nucleus.is_subset_of(&res.cell_masks[k]).unwrap(), || format!("nucleus {k} outside its mask"))?;
                check(nucleus.is_subset_of(&outlines[k]).unwrap(), || format!("nucleus {k} outside its outline"))?;
                for j in k + 1..nuclei.len() {
                    check(res.cell_masks[k].intersection_area(&res.cell_masks[j]).unwrap() == 0, || {
                        format!("cell masks {k} and {j} overlap at radius {}", res.radius)
                    })?;
                    check(outlines[k].intersection_area(&outlines[j]).unwrap() == 0, || {
                        format!("cell outlines {k} and {j} overlap at radius {}", res.radius)
                    })?;
                }
            }
        }
        for k in 0..nuclei.len() {
            check(small.cell_masks[k].is_subset_of(&large.cell_masks[k]).unwrap(), || {
                format!("cell {k} shrank from radius {r1} to {}", r1 + dr)
            })?;
        }
        Ok(())
    })?;

    // one nucleus: growth is plain dilation by the radius
    let strategy = (6.0..42.0f64, 6.0..42.0f64, 1.0..6.0f64, 3usize..12, 0.0..8.0f64);
    run(cases, strategy, |(x, y, r, n, radius)| {
        let (w, h) = LAYOUT;
        let nucleus = Polygon::regular(x, y, r, n).unwrap();
        let seed = rasterize(&nucleus, w, h);
        if seed.is_empty() {
            return Err(TestCaseError::reject("nucleus covers no pixel centre"));
        }
        let res = expand(std::slice::from_ref(&nucleus), radius, LAYOUT, LAYOUT_SCALE).unwrap();
        let lim = (radius / LAYOUT_SCALE).powi(2);
        let pts: Vec<(usize, usize)> = seed.pixels().collect();
        let dilated = Mask::from_fn(w, h, |px, py| {
            pts.iter().any(|&(qx, qy)| {
                let (dx, dy) = (px as f64 - qx as f64, py as f64 - qy as f64);
                dx * dx + dy * dy <= lim
            })
        });
        check(res.cell_masks[0] == dilated, || {
            format!("mask {} px, dilation {} px", res.cell_masks[0].area(), dilated.area())
        })
    })
}

// ---------------------------------------------------------------- stain

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

pub fn angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    let (a, b) = (unit(a), unit(b));
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    dot.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Planted stain pair near the usual H&E colours: each channel of the
/// reference vectors jittered by up to 0.15 before renormalizing.
pub fn stain_pair() -> impl Strategy<Value = ([f64; 3], [f64; 3])> {
    let jitter = || prop::array::uniform3(-0.15..0.15f64);
    (jitter(), jitter()).prop_map(|(dh, de)| {
        let r = StainProfile::reference();
        let h = unit([0.05f64.max(r.hematoxylin[0] + dh[0]), r.hematoxylin[1] + dh[1], 0.05f64.max(r.hematoxylin[2] + dh[2])]);
        let e = unit([0.01f64.max(r.eosin[0] + de[0]), r.eosin[1] + de[1], 0.01f64.max(r.eosin[2] + de[2])]);
        (h, e)
    })
}

/// 48×48 optical-density patch of random positive mixtures of the planted
/// stains, with one pixel in eight left as background.
pub fn mixture_patch(h: [f64; 3], e: [f64; 3], seed: u64) -> Grid<[f64; 3]> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let data = (0..48 * 48)
        .map(|_| {
            if rng.random_range(0..8) == 0 {
                return [0.0; 3];
            }
            let ch = rng.random_range(0.0..1.5);
            let ce = rng.random_range(0.0..1.0);
            [0, 1, 2].map(|c| ch * h[c] + ce * e[c])
        })
        .collect();
    Grid::from_vec(48, 48, data).unwrap()
}

pub fn macenko_suite(cases: u32) -> Result<(), String> {
    run(cases, (stain_pair(), any::<u64>()), |((h, e), seed)| {
        let od = mixture_patch(h, e, seed);
        let est = estimate_stain_matrix(&od, &MacenkoParams::default())
            .map_err(|err| TestCaseError::fail(err.to_string()))?;
        let (dh, de) = (angle_deg(est.hematoxylin, h), angle_deg(est.eosin, e));
        check(dh <= 2.0 && de <= 2.0, || format!("off by {dh:.3} deg (H) and {de:.3} deg (E)"))
    })
}

// ---------------------------------------------------------------- shape

/// Star-shaped simple polygons: sorted angles, radii in [2, 10].
pub fn star_strategy() -> impl Strategy<Value = Polygon> {
    prop::collection::vec((0.0..1.0f64, 2.0..10.0f64), 3..=24).prop_filter_map("degenerate", |pts| {
        let n = pts.len() as f64;
        let coords: Vec<(f64, f64)> = pts
            .iter()
            .enumerate()
            .map(|(k, (jit, r))| {
                // one vertex per angular sector keeps the angles increasing
                let t = 2.0 * PI * (k as f64 + 0.8 * jit) / n;
                (r * t.cos(), r * t.sin())
            })
            .collect();
        Polygon::from_xy(&coords).ok()
    })
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

pub fn shape_suite(cases: u32) -> Result<(), String> {
    let unit_sq = Polygon::rect(0.0, 0.0, 1.0, 1.0).unwrap();
    let f = shape_features(&unit_sq, 1.0).unwrap();
    let (min_d, max_d) = calipers_diameters(&unit_sq, 1.0).unwrap();
    let closed = [
        (f.area, 1.0),
        (f.perimeter, 4.0),
        (f.circularity, PI / 4.0),
        (f.solidity, 1.0),
        (max_d, 2f64.sqrt()),
        (min_d, 1.0),
    ];
    if let Some((got, want)) = closed.iter().find(|(g, w)| (g - w).abs() > 1e-9) {
        return Err(format!("unit square: {got} instead of {want}"));
    }

    run(cases, (0.1..50.0f64, 0.1..50.0f64, 0.05..2.0f64), |(w, h, s)| {
        let p = Polygon::rect(3.0, -7.0, w, h).unwrap();
        let f = shape_features(&p, s).unwrap();
        let (min_d, max_d) = calipers_diameters(&p, s).unwrap();
        let want = [
            (f.area, w * h * s * s),
            (f.perimeter, 2.0 * (w + h) * s),
            (f.circularity, PI * w * h / ((w + h) * (w + h))),
            (f.solidity, 1.0),
            (max_d, (w * w + h * h).sqrt() * s),
            (min_d, w.min(h) * s),
        ];
        for (i, (got, exp)) in want.iter().enumerate() {
            check((got - exp).abs() <= 1e-9 * exp.abs().max(1.0), || {
                format!("rectangle {w}x{h} at scale {s}: feature {i} is {got}, expected {exp}")
            })?;
        }
        Ok(())
    })?;

    let pow2 = prop::sample::select(vec![0.125, 0.25, 0.5, 2.0, 4.0, 8.0]);
    let strategy = (star_strategy(), 0.1..2.0f64, pow2, 0.0..(2.0 * PI), -500.0..500.0f64, -500.0..500.0f64);
    run(cases, strategy, |(poly, s, k, theta, tx, ty)| {
        let base = shape_features(&poly, s).unwrap();
        let (bmin, bmax) = calipers_diameters(&poly, s).unwrap();
        check(base.circularity <= 1.0 + 1e-9 && base.circularity > 0.0, || format!("circularity {}", base.circularity))?;
        check(base.solidity <= 1.0 + 1e-9 && base.solidity > 0.0, || format!("solidity {}", base.solidity))?;

        // power-of-two scale factors make equivariance bit-exact
        let scaled = shape_features(&poly, s * k).unwrap();
        let (smin, smax) = calipers_diameters(&poly, s * k).unwrap();
        check(
            scaled.area == base.area * k * k
                && scaled.perimeter == base.perimeter * k
                && scaled.circularity == base.circularity
                && scaled.solidity == base.solidity
                && smin == bmin * k
                && smax == bmax * k,
            || format!("scale by {k}: {base:?} -> {scaled:?}"),
        )?;

        let (sin, cos) = theta.sin_cos();
        let moved = poly
            .map_points(|p| Point::new(p.x * cos - p.y * sin + tx, p.x * sin + p.y * cos + ty))
            .unwrap();
        let m = shape_features(&moved, s).unwrap();
        let (mmin, mmax) = calipers_diameters(&moved, s).unwrap();
        let pairs = [
            (m.area, base.area),
            (m.perimeter, base.perimeter),
            (m.circularity, base.circularity),
            (m.solidity, base.solidity),
            (mmin, bmin),
            (mmax, bmax),
        ];
        for (i, (a, b)) in pairs.iter().enumerate() {
            check(rel_close(*a, *b, 1e-6), || {
                format!("rigid motion changed feature {i}: {b} -> {a}")
            })?;
        }
        Ok(())
    })
}
