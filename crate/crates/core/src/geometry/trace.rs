//! Outer-boundary tracing of 4-connected pixel regions.
//!
//! The boundary is walked along pixel edges (crack following), but the
//! returned ring joins the midpoints of consecutive boundary edges, which is
//! the marching-squares contour at level one half. No pixel centre can lie on
//! such a ring, and every centre stays on its own side, so rasterizing the
//! polygon with [`super::rasterize`] reproduces the traced component with its
//! holes filled. Cutting corners also separates the two visits of a diagonal
//! pinch point, so the ring is always simple, and outlines lose most of the
//! staircase that would otherwise inflate their perimeter.

use super::polygon::{orient, Point, Polygon};
use super::raster::Mask;

// Headings in image coordinates (y grows downwards).
const EAST: usize = 0;
const SOUTH: usize = 1;
const WEST: usize = 2;
const NORTH: usize = 3;

const STEP: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// Pixels around grid vertex `(vx, vy)` relative to `heading`, as `(dx, dy)`
/// pixel offsets from the vertex: (ahead-left, ahead-right).
fn neighbourhood(heading: usize) -> [(i64, i64); 2] {
    match heading {
        EAST => [(0, -1), (0, 0)],
        SOUTH => [(0, 0), (-1, 0)],
        WEST => [(-1, 0), (-1, -1)],
        NORTH => [(-1, -1), (0, -1)],
        _ => unreachable!(),
    }
}

/// Traces the outer boundary of the 4-connected component containing the
/// first set pixel (raster order) of `mask`. Returns `None` for an empty mask.
pub fn trace_outer(mask: &Mask) -> Option<Polygon> {
    let (sx, sy) = mask.pixels().next()?;
    let inside = |x: i64, y: i64| x >= 0 && y >= 0 && mask.get(x as usize, y as usize);

    // Walk with the region on the right-hand side (screen orientation).
    let start = (sx as i64, sy as i64);
    let mut v = start;
    let mut heading = EAST;
    let mut ring: Vec<Point> = Vec::new();
    let mut moved = false;
    loop {
        let [al, ar] = neighbourhood(heading);
        let ahead_left = inside(v.0 + al.0, v.1 + al.1);
        let ahead_right = inside(v.0 + ar.0, v.1 + ar.1);
        let next = if !ahead_right {
            (heading + 1) % 4
        } else if ahead_left {
            (heading + 3) % 4
        } else {
            heading
        };
        // the walk starts as if arriving eastwards, so the start corner is
        // only recorded on the way back in
        if moved && next != heading {
            let (a, b) = (STEP[heading], STEP[next]);
            ring.push(Point::new(v.0 as f64 - 0.5 * a.0 as f64, v.1 as f64 - 0.5 * a.1 as f64));
            ring.push(Point::new(v.0 as f64 + 0.5 * b.0 as f64, v.1 as f64 + 0.5 * b.1 as f64));
        }
        // the start edge is the only eastward edge leaving the start vertex
        if v == start && next == EAST && moved {
            break;
        }
        moved = true;
        heading = next;
        v = (v.0 + STEP[heading].0, v.1 + STEP[heading].1);
    }
    ring.dedup();
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    drop_collinear(&mut ring);
    Polygon::new(ring).ok()
}

fn drop_collinear(ring: &mut Vec<Point>) {
    let mut changed = true;
    while changed && ring.len() > 3 {
        changed = false;
        let n = ring.len();
        let mut keep = Vec::with_capacity(n);
        for i in 0..n {
            let prev = ring[(i + n - 1) % n];
            let next = ring[(i + 1) % n];
            if orient(prev, ring[i], next) != 0.0 {
                keep.push(ring[i]);
            } else {
                changed = true;
            }
        }
        *ring = keep;
    }
}

/// 4-connected components of `mask`, each as its own mask, ordered by first
/// pixel in raster order.
pub fn components(mask: &Mask) -> Vec<Mask> {
    let (width, height) = mask.dims();
    let (x0, y0, w, h) = mask.bbox();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for (x, y) in mask.pixels() {
        let idx = (y - y0) * w + (x - x0);
        if seen[idx] {
            continue;
        }
        seen[idx] = true;
        let mut stack = vec![(x, y)];
        let mut comp = Vec::new();
        while let Some((cx, cy)) = stack.pop() {
            comp.push((cx, cy));
            let nbrs = [
                (cx.wrapping_sub(1), cy),
                (cx + 1, cy),
                (cx, cy.wrapping_sub(1)),
                (cx, cy + 1),
            ];
            for (nx, ny) in nbrs {
                if mask.get(nx, ny) {
                    let nidx = (ny - y0) * w + (nx - x0);
                    if !seen[nidx] {
                        seen[nidx] = true;
                        stack.push((nx, ny));
                    }
                }
            }
        }
        out.push(Mask::from_pixels(width, height, comp));
    }
    out
}

/// Fills background regions not 8-connected to the mask's bounding-box border.
///
/// Background uses 8-connectivity, the dual of the 4-connected foreground, so
/// a gap closed only by a diagonal pinch is not a hole.
pub fn fill_holes(mask: &Mask) -> Mask {
    let (width, height) = mask.dims();
    let (x0, y0, w, h) = mask.bbox();
    if w == 0 {
        return mask.clone();
    }
    // flood the background from a one-pixel frame around the bbox
    let (fw, fh) = (w + 2, h + 2);
    let at = |fx: usize, fy: usize| -> bool {
        fx >= 1 && fy >= 1 && fx <= w && fy <= h && mask.get(x0 + fx - 1, y0 + fy - 1)
    };
    let mut outside = vec![false; fw * fh];
    let mut stack = vec![(0usize, 0usize)];
    outside[0] = true;
    while let Some((fx, fy)) = stack.pop() {
        for (dx, dy) in [(-1i64, -1i64), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
            let (nx, ny) = ((fx as i64 + dx) as usize, (fy as i64 + dy) as usize);
            if nx < fw && ny < fh && !outside[ny * fw + nx] && !at(nx, ny) {
                outside[ny * fw + nx] = true;
                stack.push((nx, ny));
            }
        }
    }
    let pixels = (1..=h).flat_map(|fy| (1..=w).map(move |fx| (fx, fy)));
    let filled: Vec<(usize, usize)> = pixels
        .filter(|&(fx, fy)| !outside[fy * fw + fx])
        .map(|(fx, fy)| (x0 + fx - 1, y0 + fy - 1))
        .collect();
    Mask::from_pixels(width, height, filled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rasterize;

    fn mask_from_art(art: &[&str]) -> Mask {
        let h = art.len();
        let w = art[0].len();
        let mut px = Vec::new();
        for (y, row) in art.iter().enumerate() {
            for (x, c) in row.chars().enumerate() {
                if c == '#' {
                    px.push((x + 1, y + 1));
                }
            }
        }
        Mask::from_pixels(w + 2, h + 2, px)
    }

    fn assert_round_trip(m: &Mask) -> Polygon {
        let poly = trace_outer(m).expect("traceable");
        let (w, h) = m.dims();
        assert_eq!(rasterize(&poly, w, h), fill_holes(m));
        poly
    }

    #[test]
    fn single_pixel_is_a_diamond() {
        let m = Mask::from_pixels(4, 4, [(1, 2)]);
        let p = trace_outer(&m).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.area(), 0.5);
        assert_round_trip(&m);
    }

    #[test]
    fn l_shape_and_plus() {
        // each convex corner loses an eighth of a pixel, each concave one
        // gains it back, and convex outnumber concave by four
        assert_eq!(assert_round_trip(&mask_from_art(&["#..", "#..", "###"])).area(), 4.5);
        assert_eq!(assert_round_trip(&mask_from_art(&[".#.", "###", ".#."])).area(), 4.5);
    }

    #[test]
    fn diagonal_pinch_stays_simple() {
        // ring of pixels touching itself diagonally at the top-right
        let m = mask_from_art(&[
            "###..", //
            "#.#..", //
            "#.##.", //
            "#..##", //
            "#####",
        ]);
        assert_round_trip(&m);
        let m = mask_from_art(&["##.", "#.#", "###"]);
        // the diagonal gap makes the centre pixel background, not a hole
        assert!(!fill_holes(&m).get(2, 2));
        assert_round_trip(&m);
    }

    #[test]
    fn hole_is_filled() {
        let m = mask_from_art(&["###", "#.#", "###"]);
        let p = trace_outer(&m).unwrap();
        assert_eq!(p.area(), 8.5);
    }

    #[test]
    fn diagonal_runs_become_straight() {
        let m = mask_from_art(&["#...", "##..", "###.", "####"]);
        let p = assert_round_trip(&m);
        // staircase collapses to one 45 degree edge: a right triangle cut at
        // its three corners, plus the two ends
        assert!(p.len() <= 6, "{} vertices", p.len());
        let stair_perimeter = 16.0;
        assert!(p.perimeter() < 0.85 * stair_perimeter);
    }

    #[test]
    fn components_are_four_connected() {
        let m = mask_from_art(&["#.", ".#"]);
        assert_eq!(components(&m).len(), 2);
        let m = mask_from_art(&["##", ".#"]);
        assert_eq!(components(&m).len(), 1);
    }

    #[test]
    fn empty_mask_has_no_outline() {
        assert!(trace_outer(&Mask::empty(3, 3)).is_none());
    }
}
