use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn dist2(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Orientation of `c` relative to the directed line `a -> b`
/// (positive when `c` lies to the left in a y-up frame).
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    b.sub(a).cross(c.sub(a))
}

/// A simple polygon in pixel coordinates, implicitly closed.
///
/// Construction validates the ring: at least three distinct vertices, no
/// self-intersections, nonzero area. Vertices are stored with positive
/// signed (shoelace) area; a clockwise input is reversed while keeping its
/// first vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let mut vertices = vertices;
        vertices.dedup();
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::InvalidPolygon(format!(
                "need at least 3 distinct vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidPolygon("non-finite coordinate".into()));
        }
        let area2 = signed_area2(&vertices);
        if area2 == 0.0 {
            return Err(Error::InvalidPolygon("zero area".into()));
        }
        if let Some((i, j)) = find_self_intersection(&vertices) {
            return Err(Error::InvalidPolygon(format!(
                "edges {i} and {j} intersect"
            )));
        }
        if area2 < 0.0 {
            vertices[1..].reverse();
        }
        Ok(Self { vertices })
    }

    pub fn from_xy(coords: &[(f64, f64)]) -> Result<Self> {
        Self::new(coords.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    /// Parses a flat `[x0, y0, x1, y1, ...]` list (COCO segmentation layout).
    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if coords.len() % 2 != 0 {
            return Err(Error::InvalidPolygon(format!(
                "odd coordinate count {}",
                coords.len()
            )));
        }
        Self::new(
            coords
                .chunks_exact(2)
                .map(|c| Point::new(c[0], c[1]))
                .collect(),
        )
    }

    /// Axis-aligned rectangle `[x, x+w] x [y, y+h]`.
    pub fn rect(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        Self::from_xy(&[(x, y), (x + w, y), (x + w, y + h), (x, y + h)])
    }

    /// Regular `n`-gon inscribed in the circle of radius `r` around `(cx, cy)`.
    pub fn regular(cx: f64, cy: f64, r: f64, n: usize) -> Result<Self> {
        let pts = (0..n)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                Point::new(cx + r * t.cos(), cy + r * t.sin())
            })
            .collect();
        Self::new(pts)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area in square pixels.
    pub fn area(&self) -> f64 {
        signed_area2(&self.vertices).abs() / 2.0
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.dist2(b).sqrt()).sum()
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point {
        let origin = self.vertices[0];
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        for (p, q) in self.edges() {
            let p = p.sub(origin);
            let q = q.sub(origin);
            let c = p.cross(q);
            a2 += c;
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        Point::new(origin.x + cx / (3.0 * a2), origin.y + cy / (3.0 * a2))
    }

    /// Even-odd point containment. Points exactly on an edge are resolved by
    /// the half-open crossing rule, consistently with [`crate::geometry::rasterize`].
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.vertices.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
        )
    }

    /// Applies `f` to every vertex and revalidates.
    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> Result<Polygon> {
        Polygon::new(self.vertices.iter().copied().map(f).collect())
    }

    /// Closed ring `[[x, y], ...]` with the first vertex repeated last.
    pub fn closed_ring(&self) -> Vec<[f64; 2]> {
        self.vertices
            .iter()
            .chain(std::iter::once(&self.vertices[0]))
            .map(|p| [p.x, p.y])
            .collect()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.vertices.iter().flat_map(|p| [p.x, p.y]).collect()
    }
}

fn signed_area2(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    let origin = vertices[0];
    (0..n)
        .map(|i| {
            vertices[i]
                .sub(origin)
                .cross(vertices[(i + 1) % n].sub(origin))
        })
        .sum()
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

fn find_self_intersection(v: &[Point]) -> Option<(usize, usize)> {
    let n = v.len();
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        // adjacent edges share a vertex; they are only invalid when they fold back
        let next = v[(i + 2) % n];
        if orient(a, b, next) == 0.0 && (on_segment(a, b, next) || on_segment(b, next, a)) {
            return Some((i, (i + 1) % n));
        }
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = (v[j], v[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_is_normalized_keeping_first_vertex() {
        let cw = Polygon::from_xy(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)]).unwrap();
        assert_eq!(cw.vertices()[0], Point::new(0.0, 0.0));
        assert!(signed_area2(cw.vertices()) > 0.0);
        assert_eq!(cw.area(), 1.0);
    }

    #[test]
    fn closing_vertex_is_dropped() {
        let p = Polygon::from_xy(&[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 0.0)]).unwrap();
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn rejects_bowtie() {
        let err = Polygon::from_xy(&[(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)]);
        assert!(matches!(err, Err(Error::InvalidPolygon(_))));
    }

    #[test]
    fn rejects_touching_vertex() {
        // figure-eight through a shared vertex
        let err = Polygon::from_xy(&[
            (0.0, 0.0),
            (2.0, 0.0),
            (1.0, 1.0),
            (2.0, 2.0),
            (0.0, 2.0),
            (1.0, 1.0),
        ]);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Polygon::from_xy(&[(0.0, 0.0), (1.0, 0.0)]).is_err());
        assert!(Polygon::from_xy(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]).is_err());
        assert!(Polygon::from_flat(&[0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn centroid_of_rectangle() {
        let r = Polygon::rect(2.0, 4.0, 6.0, 2.0).unwrap();
        let c = r.centroid();
        assert!((c.x - 5.0).abs() < 1e-12 && (c.y - 5.0).abs() < 1e-12);
    }

    #[test]
    fn contains_uses_even_odd() {
        let sq = Polygon::rect(0.0, 0.0, 10.0, 10.0).unwrap();
        assert!(sq.contains(Point::new(5.0, 5.0)));
        assert!(!sq.contains(Point::new(10.5, 5.0)));
        assert!(!sq.contains(Point::new(-0.5, 5.0)));
    }

    #[test]
    fn closed_ring_repeats_first_vertex() {
        let t = Polygon::from_xy(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]).unwrap();
        let ring = t.closed_ring();
        assert_eq!(ring.len(), 4);
        assert_eq!(ring[0], ring[3]);
    }
}
