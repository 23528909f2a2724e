//! Grayscale filters on `Grid<f64>` used by nucleus detection.

use std::collections::VecDeque;

use crate::patch::Grid;

/// Rounds a pixel radius to the nearest 0.1 px.
pub fn round_radius(px: f64) -> f64 {
    (px * 10.0).round() / 10.0
}

fn reflect(i: isize, n: usize) -> usize {
    // mirror without repeating the edge sample: -1 -> 1, n -> n-2
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// Separable Gaussian blur with a kernel truncated at 4σ and mirrored borders.
pub fn gaussian_blur(src: &Grid<f64>, sigma: f64) -> Grid<f64> {
    if sigma <= 0.0 {
        return src.clone();
    }
    let radius = (4.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let (w, h) = (src.width, src.height);
    let mut tmp = Grid::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let sx = reflect(x as isize + k as isize - radius, w);
                acc += kv * src.data[y * w + sx];
            }
            tmp.data[y * w + x] = acc;
        }
    }
    let mut out = Grid::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let sy = reflect(y as isize + k as isize - radius, h);
                acc += kv * tmp.data[sy * w + x];
            }
            out.data[y * w + x] = acc;
        }
    }
    out
}

/// Half-widths of the rows of a digital disk: offsets `(dy, half_width)` for
/// all `dy` with `dx² + dy² ≤ r²` nonempty.
fn disk_rows(radius: f64) -> Vec<(isize, usize)> {
    let r = radius.floor() as isize;
    (-r..=r)
        .map(|dy| {
            let hw = (radius * radius - (dy * dy) as f64).max(0.0).sqrt().floor() as usize;
            (dy, hw)
        })
        .collect()
}

/// Running 1-D extremum over windows `[x - hw, x + hw]` (clipped to the row).
fn sliding_extremum(row: &[f64], hw: usize, take_min: bool) -> Vec<f64> {
    let n = row.len();
    let better = |a: f64, b: f64| if take_min { a <= b } else { a >= b };
    let mut out = vec![0.0; n];
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut next = 0usize;
    for x in 0..n {
        let hi = (x + hw).min(n - 1);
        while next <= hi {
            while let Some(&back) = dq.back() {
                if better(row[next], row[back]) {
                    dq.pop_back();
                } else {
                    break;
                }
            }
            dq.push_back(next);
            next += 1;
        }
        while let Some(&front) = dq.front() {
            if front + hw < x {
                dq.pop_front();
            } else {
                break;
            }
        }
        out[x] = row[*dq.front().expect("window nonempty")];
    }
    out
}

fn disk_extremum(src: &Grid<f64>, radius: f64, take_min: bool) -> Grid<f64> {
    let (w, h) = (src.width, src.height);
    let rows = disk_rows(radius);
    let mut widths: Vec<usize> = rows.iter().map(|r| r.1).collect();
    widths.sort_unstable();
    widths.dedup();
    // per distinct half-width, the horizontal extremum of every row
    let mut by_width: Vec<Vec<Vec<f64>>> = Vec::with_capacity(widths.len());
    for &hw in &widths {
        by_width.push(
            (0..h)
                .map(|y| sliding_extremum(&src.data[y * w..(y + 1) * w], hw, take_min))
                .collect(),
        );
    }
    let init = if take_min { f64::INFINITY } else { f64::NEG_INFINITY };
    let mut out = Grid::filled(w, h, init);
    for &(dy, hw) in &rows {
        let line = &by_width[widths.binary_search(&hw).unwrap()];
        for y in 0..h {
            let sy = y as isize + dy;
            if sy < 0 || sy >= h as isize {
                continue;
            }
            let src_row = &line[sy as usize];
            let dst = &mut out.data[y * w..(y + 1) * w];
            for (d, &s) in dst.iter_mut().zip(src_row) {
                *d = if take_min { d.min(s) } else { d.max(s) };
            }
        }
    }
    out
}

/// Grayscale erosion with a disk; the structuring element is clipped at the border.
pub fn erode_disk(src: &Grid<f64>, radius: f64) -> Grid<f64> {
    disk_extremum(src, radius, true)
}

pub fn dilate_disk(src: &Grid<f64>, radius: f64) -> Grid<f64> {
    disk_extremum(src, radius, false)
}

/// Grayscale opening (erosion then dilation) with a disk.
pub fn open_disk(src: &Grid<f64>, radius: f64) -> Grid<f64> {
    dilate_disk(&erode_disk(src, radius), radius)
}

fn neighbours4(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    let cand = [
        (x.wrapping_sub(1), y),
        (x + 1, y),
        (x, y.wrapping_sub(1)),
        (x, y + 1),
    ];
    cand.into_iter().filter(move |&(nx, ny)| nx < w && ny < h)
}

/// Morphological reconstruction by dilation of `marker` under `mask`
/// (4-connected), via the two raster scans plus FIFO propagation.
pub fn reconstruct_by_dilation(marker: &Grid<f64>, mask: &Grid<f64>) -> Grid<f64> {
    let (w, h) = (mask.width, mask.height);
    let mut out = Grid {
        width: w,
        height: h,
        data: marker
            .data
            .iter()
            .zip(&mask.data)
            .map(|(a, b)| a.min(*b))
            .collect(),
    };
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut v = out.data[i];
            if x > 0 {
                v = v.max(out.data[i - 1]);
            }
            if y > 0 {
                v = v.max(out.data[i - w]);
            }
            out.data[i] = v.min(mask.data[i]);
        }
    }
    let mut queue = VecDeque::new();
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let i = y * w + x;
            let mut v = out.data[i];
            if x + 1 < w {
                v = v.max(out.data[i + 1]);
            }
            if y + 1 < h {
                v = v.max(out.data[i + w]);
            }
            v = v.min(mask.data[i]);
            out.data[i] = v;
            let feeds = |j: usize| out.data[j] < v && out.data[j] < mask.data[j];
            if (x + 1 < w && feeds(i + 1)) || (y + 1 < h && feeds(i + w)) {
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        let v = out.data[y * w + x];
        for (nx, ny) in neighbours4(x, y, w, h) {
            let j = ny * w + nx;
            if out.data[j] < v && out.data[j] != mask.data[j] {
                out.data[j] = v.min(mask.data[j]);
                queue.push_back((nx, ny));
            }
        }
    }
    out
}

/// Labels the regional maxima of `f` restricted to `domain`: 4-connected
/// plateaus of equal value with no strictly higher 4-neighbour inside the
/// domain. Labels are 1..=K in raster order of each plateau's first pixel;
/// other pixels get 0.
pub fn regional_maxima(f: &Grid<f64>, domain: &[bool]) -> (Grid<u32>, u32) {
    let (w, h) = (f.width, f.height);
    let mut labels = Grid::filled(w, h, 0u32);
    let mut visited = vec![false; w * h];
    let mut next = 0u32;
    let mut plateau = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if visited[start] || !domain[start] {
            continue;
        }
        let v = f.data[start];
        plateau.clear();
        stack.push(start);
        visited[start] = true;
        let mut is_max = true;
        while let Some(i) = stack.pop() {
            plateau.push(i);
            for (nx, ny) in neighbours4(i % w, i / w, w, h) {
                let j = ny * w + nx;
                if !domain[j] {
                    continue;
                }
                if f.data[j] > v {
                    is_max = false;
                } else if f.data[j] == v && !visited[j] {
                    visited[j] = true;
                    stack.push(j);
                }
            }
        }
        if is_max {
            next += 1;
            for &i in &plateau {
                labels.data[i] = next;
            }
        }
    }
    (labels, next)
}

/// Seeds of the h-maxima transform: regional maxima of the reconstruction of
/// `f - depth` under `f`, within `domain`.
pub fn h_maxima(f: &Grid<f64>, depth: f64, domain: &[bool]) -> (Grid<u32>, u32) {
    let lowered = f.map(|v| v - depth);
    let rec = reconstruct_by_dilation(&lowered, f);
    regional_maxima(&rec, domain)
}

/// 4-connected component labelling of `domain`, labels 1..=K in raster order.
pub fn label_components(w: usize, h: usize, domain: &[bool]) -> (Grid<u32>, u32) {
    let mut labels = Grid::filled(w, h, 0u32);
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !domain[start] || labels.data[start] != 0 {
            continue;
        }
        next += 1;
        labels.data[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            for (nx, ny) in neighbours4(i % w, i / w, w, h) {
                let j = ny * w + nx;
                if domain[j] && labels.data[j] == 0 {
                    labels.data[j] = next;
                    stack.push(j);
                }
            }
        }
    }
    (labels, next)
}

/// Marker-controlled watershed by priority flooding (4-connected, no dams).
///
/// Pixels of `domain` are flooded from the labelled `markers` in increasing
/// order of `cost`; equal costs are processed first-in first-out, making the
/// result deterministic. Domain pixels unreachable from any marker stay 0.
pub fn watershed(cost: &Grid<f64>, markers: &Grid<u32>, domain: &[bool]) -> Grid<u32> {
    use std::cmp::Ordering;
    use std::collections::BinaryHeap;

    #[derive(PartialEq)]
    struct Item {
        cost: f64,
        order: u64,
        idx: usize,
    }
    impl Eq for Item {}
    impl Ord for Item {
        fn cmp(&self, other: &Self) -> Ordering {
            other
                .cost
                .total_cmp(&self.cost)
                .then(other.order.cmp(&self.order))
        }
    }
    impl PartialOrd for Item {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }

    let (w, h) = (cost.width, cost.height);
    let mut labels = markers.clone();
    let mut queued = vec![false; w * h];
    let mut heap = BinaryHeap::new();
    let mut order = 0u64;
    for i in 0..w * h {
        if labels.data[i] != 0 {
            queued[i] = true;
            for (nx, ny) in neighbours4(i % w, i / w, w, h) {
                let j = ny * w + nx;
                if domain[j] && labels.data[j] == 0 && !queued[j] {
                    queued[j] = true;
                    heap.push(Item {
                        cost: cost.data[j],
                        order,
                        idx: j,
                    });
                    order += 1;
                }
            }
        }
    }
    while let Some(Item { idx, .. }) = heap.pop() {
        // adopt the label of the first labelled neighbour (fixed scan order)
        let label = neighbours4(idx % w, idx / w, w, h)
            .map(|(nx, ny)| labels.data[ny * w + nx])
            .find(|&l| l != 0)
            .unwrap_or(0);
        labels.data[idx] = label;
        for (nx, ny) in neighbours4(idx % w, idx / w, w, h) {
            let j = ny * w + nx;
            if domain[j] && !queued[j] {
                queued[j] = true;
                heap.push(Item {
                    cost: cost.data[j],
                    order,
                    idx: j,
                });
                order += 1;
            }
        }
    }
    labels
}
