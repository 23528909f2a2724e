use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geometry::Mask;

/// A scored predicted mask. Score-free detections rank as confidence 1.0.
#[derive(Debug, Clone)]
pub struct Detection {
    pub mask: Mask,
    pub confidence: Option<f64>,
}

impl Detection {
    pub fn score(&self) -> f64 {
        self.confidence.unwrap_or(1.0)
    }
}

/// Detections and gold masks of one image for one class.
#[derive(Debug, Clone, Default)]
pub struct ImageInstances {
    pub detections: Vec<Detection>,
    pub gold: Vec<Mask>,
}

/// Greedy matching outcome of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Detection indices in ranking order.
    pub order: Vec<usize>,
    /// Per ranked detection: matched a gold instance.
    pub true_positives: Vec<bool>,
    pub false_positives: Vec<bool>,
    /// Gold index matched by each ranked detection.
    pub matched_gold: Vec<Option<usize>>,
    pub num_gold: usize,
    pub iou_threshold: f64,
}

pub fn mask_iou(a: &Mask, b: &Mask) -> Result<f64> {
    a.iou(b)
}

/// Ranking: confidence descending, then larger mask area, then lower index.
fn rank(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score()
            .total_cmp(&dets[a].score())
            .then(dets[b].mask.area().cmp(&dets[a].mask.area()))
            .then(a.cmp(&b))
    });
    order
}

/// Greedy COCO-style matching: each ranked detection takes the unmatched
/// gold instance of highest IoU, provided IoU ≥ `iou_threshold` (ties → lower
/// gold index).
pub fn match_detections(
    detections: &[Detection],
    gold: &[Mask],
    iou_threshold: f64,
) -> Result<MatchResult> {
    let order = rank(detections);
    let mut taken = vec![false; gold.len()];
    let mut tp = Vec::with_capacity(order.len());
    let mut matched = Vec::with_capacity(order.len());
    for &d in &order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gm) in gold.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let iou = detections[d].mask.iou(gm)?;
            if iou >= iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
        }
        tp.push(best.is_some());
        matched.push(best.map(|b| b.0));
    }
    Ok(MatchResult {
        false_positives: tp.iter().map(|t| !t).collect(),
        true_positives: tp,
        matched_gold: matched,
        order,
        num_gold: gold.len(),
        iou_threshold,
    })
}

/// 101-point interpolated AP (percent) from TP flags in ranking order.
pub fn interpolated_ap(tp_in_rank_order: &[bool], num_gold: usize) -> Result<f64> {
    if num_gold == 0 {
        return Err(Error::EmptyGold);
    }
    let mut recall = Vec::with_capacity(tp_in_rank_order.len());
    let mut precision = Vec::with_capacity(tp_in_rank_order.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &t in tp_in_rank_order {
        if t {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / num_gold as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    // precision envelope: non-increasing from the right
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let mut sum = 0.0;
    for k in 0..=100 {
        let r = k as f64 / 100.0;
        let pos = recall.partition_point(|&x| x < r);
        if pos < precision.len() {
            sum += precision[pos];
        }
    }
    Ok(100.0 * sum / 101.0)
}

/// Single-image AP in percent.
pub fn average_precision(detections: &[Detection], gold: &[Mask], iou_threshold: f64) -> Result<f64> {
    average_precision_multi(
        &[ImageInstances {
            detections: detections.to_vec(),
            gold: gold.to_vec(),
        }],
        iou_threshold,
    )
}

/// AP in percent over several images: matching per image, then one global
/// ranking of all detections (score, area, image order, index).
pub fn average_precision_multi(images: &[ImageInstances], iou_threshold: f64) -> Result<f64> {
    let num_gold: usize = images.iter().map(|im| im.gold.len()).sum();
    if num_gold == 0 {
        return Err(Error::EmptyGold);
    }
    let mut ranked: Vec<(f64, usize, usize, usize, bool)> = Vec::new();
    for (i, im) in images.iter().enumerate() {
        let m = match_detections(&im.detections, &im.gold, iou_threshold)?;
        for (&d, &t) in m.order.iter().zip(&m.true_positives) {
            let det = &im.detections[d];
            ranked.push((det.score(), det.mask.area(), i, d, t));
        }
    }
    ranked.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(b.1.cmp(&a.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
            .then(Ordering::Equal)
    });
    let flags: Vec<bool> = ranked.iter().map(|r| r.4).collect();
    interpolated_ap(&flags, num_gold)
}
