//! Exact squared Euclidean distance transform on pixel centres
//! (Felzenszwalb & Huttenlocher lower-envelope algorithm, one pass per axis).

use crate::patch::Grid;

const INF: f64 = 1e20;

/// 1-D squared distance transform of sampled function `f` (in place into `d`).
fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let fq = f[q] + (q * q) as f64;
        loop {
            let p = v[k];
            let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, dq) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let diff = q as f64 - p as f64;
        *dq = diff * diff + f[p];
    }
}

/// Squared distance from every pixel centre to the nearest `true` pixel
/// centre. With no `true` pixel every entry is a large sentinel (≥ 1e20).
pub fn squared_edt(width: usize, height: usize, features: &[bool]) -> Grid<f64> {
    assert_eq!(features.len(), width * height);
    let n = width.max(height);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    let mut grid = Grid {
        width,
        height,
        data: features.iter().map(|&b| if b { 0.0 } else { INF }).collect(),
    };
    for x in 0..width {
        for y in 0..height {
            f[y] = grid.data[y * width + x];
        }
        edt_1d(&f[..height], &mut d[..height], &mut v, &mut z);
        for y in 0..height {
            grid.data[y * width + x] = d[y];
        }
    }
    for y in 0..height {
        f[..width].copy_from_slice(&grid.data[y * width..(y + 1) * width]);
        edt_1d(&f[..width], &mut d[..width], &mut v, &mut z);
        grid.data[y * width..(y + 1) * width].copy_from_slice(&d[..width]);
    }
    grid
}
