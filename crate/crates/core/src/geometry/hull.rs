use super::polygon::{orient, Point};

/// Convex hull by Andrew's monotone chain.
///
/// Returns hull vertices in positive (counter-clockwise, y-up) order with
/// collinear points removed. Fewer than three distinct input points yield the
/// distinct points themselves.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Shoelace area of a vertex ring (absolute value).
pub fn ring_area(ring: &[Point]) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    let o = ring[0];
    let n = ring.len();
    let twice: f64 = (0..n)
        .map(|i| ring[i].sub(o).cross(ring[(i + 1) % n].sub(o)))
        .sum();
    twice.abs() / 2.0
}

/// Distance from `p` to the line through edge `a -> b`.
pub fn edge_distance(a: Point, b: Point, p: Point) -> f64 {
    orient(a, b, p).abs() / a.dist2(b).sqrt()
}

/// Caliper measurements of a convex hull, in the hull's own units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calipers {
    /// Largest distance between two hull vertices.
    pub diameter: f64,
    /// Smallest width over all hull edge directions.
    pub width: f64,
}

/// Rotating calipers over a convex hull given in positive order
/// (as returned by [`convex_hull`]).
///
/// For every hull edge the antipodal vertex is advanced monotonically. The
/// largest vertex distance is attained at an antipodal pair and the minimum
/// width is attained flush against an edge, so one sweep yields both.
pub fn rotating_calipers(hull: &[Point]) -> Calipers {
    let n = hull.len();
    match n {
        0 | 1 => {
            return Calipers {
                diameter: 0.0,
                width: 0.0,
            }
        }
        2 => {
            return Calipers {
                diameter: hull[0].dist2(hull[1]).sqrt(),
                width: 0.0,
            }
        }
        _ => {}
    }
    let mut diameter2 = 0.0_f64;
    let mut width = f64::INFINITY;
    let mut j = 1;
    for i in 0..n {
        let a = hull[i];
        let b = hull[(i + 1) % n];
        // advance j while the next vertex is farther from edge (a, b)
        let mut steps = 0;
        while steps < n && orient(a, b, hull[(j + 1) % n]) > orient(a, b, hull[j]) {
            j = (j + 1) % n;
            steps += 1;
        }
        width = width.min(edge_distance(a, b, hull[j]));
        diameter2 = diameter2
            .max(a.dist2(hull[j]))
            .max(b.dist2(hull[j]));
        // pairs with the predecessor of j are antipodal too when the edge is parallel
        let next = hull[(j + 1) % n];
        if orient(a, b, next) == orient(a, b, hull[j]) {
            diameter2 = diameter2.max(a.dist2(next)).max(b.dist2(next));
        }
    }
    Calipers {
        diameter: diameter2.sqrt(),
        width,
    }
}
