//! Detection average precision.
//!
//! Classic ranked-retrieval scoring for box detectors: detections are
//! ranked by confidence, greedily claimed against ground truth frame by
//! frame, and the area under the interpolated precision-recall curve is
//! reported per IOU threshold. Unlike the tracking scores this knows
//! nothing about identity — a detector that flickers between ids can still
//! score perfectly here.

use std::collections::BTreeMap;

use crate::tracking::iou_bev;
use crate::types::Box3D;

/// Precision-recall curve at one IOU threshold. `points` holds the
/// (recall, precision) pair after each ranked detection; `ap` is the
/// all-point interpolated area, a fraction in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub threshold: f64,
    pub points: Vec<(f64, f64)>,
    pub ap: f64,
}

/// Scores detections `(frame, box, confidence)` against ground truth
/// `(frame, box)` at each IOU threshold.
///
/// Per threshold: detections are visited in descending confidence (ties
/// keep input order) and each claims the unclaimed same-frame ground-truth
/// box it overlaps best, if that overlap clears the threshold. A second
/// detection on an already-claimed box is a false positive, as is any
/// detection that clears nothing. With no ground truth at all the AP is
/// defined as 0.
pub fn average_precision(
    detections: &[(u64, Box3D, f64)],
    ground_truth: &[(u64, Box3D)],
    thresholds: &[f64],
) -> Vec<PrCurve> {
    // Ground truth grouped by frame, as indices into a per-threshold
    // claim table.
    let mut gt_by_frame: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (idx, &(frame, _)) in ground_truth.iter().enumerate() {
        gt_by_frame.entry(frame).or_default().push(idx);
    }

    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].2.total_cmp(&detections[a].2));

    thresholds
        .iter()
        .map(|&alpha| {
            let mut claimed = vec![false; ground_truth.len()];
            let mut tp = 0u64;
            let mut fp = 0u64;
            let mut points = Vec::with_capacity(order.len());
            for &d in &order {
                let (frame, ref dbox, _) = detections[d];
                let best = gt_by_frame
                    .get(&frame)
                    .into_iter()
                    .flatten()
                    .filter(|&&g| !claimed[g])
                    .map(|&g| (g, iou_bev(dbox, &ground_truth[g].1)))
                    .filter(|&(_, iou)| iou >= alpha)
                    // max_by keeps the later of equal elements, so reverse
                    // the scan to prefer the earlier ground-truth box.
                    .rev()
                    .max_by(|a, b| a.1.total_cmp(&b.1));
                match best {
                    Some((g, _)) => {
                        claimed[g] = true;
                        tp += 1;
                    }
                    None => fp += 1,
                }
                let recall = if ground_truth.is_empty() {
                    0.0
                } else {
                    tp as f64 / ground_truth.len() as f64
                };
                points.push((recall, tp as f64 / (tp + fp) as f64));
            }
            PrCurve {
                threshold: alpha,
                ap: interpolated_area(&points),
                points,
            }
        })
        .collect()
}

/// All-point interpolated area under a PR curve whose recall is
/// non-decreasing: each recall increment is credited with the best
/// precision achieved at that recall or beyond.
fn interpolated_area(points: &[(f64, f64)]) -> f64 {
    let mut ceiling = vec![0.0f64; points.len()];
    let mut running = 0.0f64;
    for (i, &(_, p)) in points.iter().enumerate().rev() {
        running = running.max(p);
        ceiling[i] = running;
    }
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for (i, &(r, _)) in points.iter().enumerate() {
        area += (r - prev_recall) * ceiling[i];
        prev_recall = r;
    }
    area
}
