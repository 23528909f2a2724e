use crate::error::{Error, Result};

use super::polygon::Polygon;

/// Binary mask on an image grid, stored cropped to its bounding box.
///
/// Pixel `(x, y)` is column `x`, row `y`; it covers `[x, x+1) x [y, y+1)` and
/// its center is `(x + 0.5, y + 0.5)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            x0: 0,
            y0: 0,
            w: 0,
            h: 0,
            bits: Vec::new(),
        }
    }

    /// Builds a mask from `(x, y)` pixel coordinates; out-of-bounds pixels are ignored.
    pub fn from_pixels(
        width: usize,
        height: usize,
        pixels: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let pixels: Vec<(usize, usize)> = pixels
            .into_iter()
            .filter(|&(x, y)| x < width && y < height)
            .collect();
        if pixels.is_empty() {
            return Self::empty(width, height);
        }
        let x0 = pixels.iter().map(|p| p.0).min().unwrap();
        let x1 = pixels.iter().map(|p| p.0).max().unwrap();
        let y0 = pixels.iter().map(|p| p.1).min().unwrap();
        let y1 = pixels.iter().map(|p| p.1).max().unwrap();
        let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
        let mut bits = vec![false; w * h];
        for (x, y) in pixels {
            bits[(y - y0) * w + (x - x0)] = true;
        }
        Self {
            width,
            height,
            x0,
            y0,
            w,
            h,
            bits,
        }
    }

    /// Mask of all pixels where `pred(x, y)` holds, scanning the full grid.
    pub fn from_fn(width: usize, height: usize, pred: impl Fn(usize, usize) -> bool) -> Self {
        let pixels = (0..height).flat_map(|y| (0..width).map(move |x| (x, y)));
        Self::from_pixels(width, height, pixels.filter(|&(x, y)| pred(x, y)))
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Bounding box `(x0, y0, w, h)` of the stored crop.
    pub fn bbox(&self) -> (usize, usize, usize, usize) {
        (self.x0, self.y0, self.w, self.h)
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        x >= self.x0
            && y >= self.y0
            && x < self.x0 + self.w
            && y < self.y0 + self.h
            && self.bits[(y - self.y0) * self.w + (x - self.x0)]
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    /// Set pixels in raster order (row-major, top-left first).
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.h).flat_map(move |r| {
            (0..self.w).filter_map(move |c| {
                self.bits[r * self.w + c].then_some((self.x0 + c, self.y0 + r))
            })
        })
    }

    fn check_dims(&self, other: &Mask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch(format!(
                "mask {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    pub fn intersection_area(&self, other: &Mask) -> Result<usize> {
        self.check_dims(other)?;
        let xa = self.x0.max(other.x0);
        let ya = self.y0.max(other.y0);
        let xb = (self.x0 + self.w).min(other.x0 + other.w);
        let yb = (self.y0 + self.h).min(other.y0 + other.h);
        let mut n = 0;
        for y in ya..yb {
            for x in xa..xb {
                if self.get(x, y) && other.get(x, y) {
                    n += 1;
                }
            }
        }
        Ok(n)
    }

    /// `|a ∩ b| / |a ∪ b|`, 0 when the union is empty.
    pub fn iou(&self, other: &Mask) -> Result<f64> {
        let inter = self.intersection_area(other)?;
        let union = self.area() + other.area() - inter;
        Ok(if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        })
    }

    pub fn is_subset_of(&self, other: &Mask) -> Result<bool> {
        self.check_dims(other)?;
        Ok(self.pixels().all(|(x, y)| other.get(x, y)))
    }

    pub fn union(&self, other: &Mask) -> Result<Mask> {
        self.check_dims(other)?;
        Ok(Mask::from_pixels(
            self.width,
            self.height,
            self.pixels().chain(other.pixels()),
        ))
    }
}

/// Pixel-center even-odd rasterization.
///
/// Pixel `(x, y)` is set iff `(x + 0.5, y + 0.5)` is inside `poly` under the
/// same half-open crossing rule as [`Polygon::contains`]. Parts of the polygon
/// outside `width x height` are clipped.
pub fn rasterize(poly: &Polygon, width: usize, height: usize) -> Mask {
    let (min_x, min_y, max_x, max_y) = poly.bounds();
    // candidate rows: centers y + 0.5 within [min_y, max_y]
    let row_lo = (min_y - 0.5).ceil().max(0.0);
    let row_hi = (max_y - 0.5).floor().min(height as f64 - 1.0);
    let col_lo = (min_x - 0.5).ceil().max(0.0);
    let col_hi = (max_x - 0.5).floor().min(width as f64 - 1.0);
    if row_lo > row_hi || col_lo > col_hi {
        return Mask::empty(width, height);
    }
    let (row_lo, row_hi) = (row_lo as usize, row_hi as usize);
    let (col_lo, col_hi) = (col_lo as usize, col_hi as usize);

    let mut pixels = Vec::new();
    let mut crossings: Vec<f64> = Vec::new();
    for row in row_lo..=row_hi {
        let py = row as f64 + 0.5;
        crossings.clear();
        for (a, b) in poly.edges() {
            if (a.y > py) != (b.y > py) {
                crossings.push((b.x - a.x) * (py - a.y) / (b.y - a.y) + a.x);
            }
        }
        crossings.sort_by(f64::total_cmp);
        for span in crossings.chunks_exact(2) {
            // inside iff span[0] <= px < span[1]
            let lo = (span[0] - 0.5).ceil().max(col_lo as f64);
            let hi = (span[1] - 0.5).ceil() - 1.0;
            let hi = hi.min(col_hi as f64);
            if lo > hi {
                continue;
            }
            for col in lo as usize..=hi as usize {
                pixels.push((col, row));
            }
        }
    }
    Mask::from_pixels(width, height, pixels)
}
