//! CLEAR-MOT matching and scores.
//!
//! Frame-by-frame bipartite matching between ground truth and predictions
//! with an identity-keeping rule: a pair matched last time stays matched
//! while both are present and still overlap enough, and only the leftovers
//! go through the optimal assignment. Without the carry-over, two
//! predictions straddling one ground-truth box could trade places every
//! frame and each trade would look like an identity switch.

use std::collections::BTreeMap;

use crate::tracking::associate_kiou;
use crate::types::Box3D;

use super::AlignedFrame;

/// Match outcome for one tick of the common timeline.
#[derive(Debug, Clone)]
pub struct FrameMatch {
    pub t: f64,
    /// `(gt id, pred id, IOU)` for each covered ground-truth box.
    pub matches: Vec<(u64, u64, f64)>,
    /// Ground-truth ids present but uncovered (false negatives).
    pub misses: Vec<u64>,
    /// Prediction ids present but unused (false positives).
    pub false_positives: Vec<u64>,
}

/// The matched timeline plus the identity-switch count.
#[derive(Debug, Clone)]
pub struct MatchSequence {
    pub frames: Vec<FrameMatch>,
    /// Times a ground-truth object's matched prediction id differed from
    /// its previous match — counted across gaps, not just adjacent frames.
    pub switches: u64,
}

/// Matches every frame of the aligned timeline at the given IOU threshold.
pub fn match_frames(frames: &[AlignedFrame], iou_threshold: f64) -> MatchSequence {
    // Last prediction each ground-truth object was matched to, across the
    // whole sequence so far (survives frames where either side is absent).
    let mut last_partner: BTreeMap<u64, u64> = BTreeMap::new();
    let mut switches = 0u64;
    let mut out = Vec::with_capacity(frames.len());

    for frame in frames {
        let mut matches: Vec<(u64, u64, f64)> = Vec::new();
        let mut gt_left: Vec<(u64, Box3D)> = Vec::new();
        let mut pred_left: Vec<(u64, Box3D)> = frame.pred.clone();

        // Carry-over pass: keep last frame's pairs while they still hold.
        // frame.gt iterates in insertion order; ids were inserted in
        // BTreeMap order during alignment, so conflicts (two ground-truth
        // objects remembering the same prediction) resolve to the lower id.
        for &(gid, gbox) in &frame.gt {
            let kept = last_partner.get(&gid).copied().and_then(|pid| {
                let slot = pred_left.iter().position(|&(id, _)| id == pid)?;
                let iou = crate::tracking::iou_bev(&gbox, &pred_left[slot].1);
                (iou >= iou_threshold).then_some((slot, pid, iou))
            });
            match kept {
                Some((slot, pid, iou)) => {
                    pred_left.swap_remove(slot);
                    matches.push((gid, pid, iou));
                }
                None => gt_left.push((gid, gbox)),
            }
        }

        // Optimal assignment for whatever the carry-over didn't claim.
        let gt_boxes: Vec<Box3D> = gt_left.iter().map(|&(_, b)| b).collect();
        let pred_boxes: Vec<Box3D> = pred_left.iter().map(|&(_, b)| b).collect();
        let assoc = associate_kiou(&gt_boxes, &pred_boxes, iou_threshold);
        for &(gi, pi) in &assoc.matches {
            let iou = crate::tracking::iou_bev(&gt_boxes[gi], &pred_boxes[pi]);
            matches.push((gt_left[gi].0, pred_left[pi].0, iou));
        }

        let misses: Vec<u64> = assoc.unmatched_tracks.iter().map(|&gi| gt_left[gi].0).collect();
        let false_positives: Vec<u64> = assoc
            .unmatched_detections
            .iter()
            .map(|&pi| pred_left[pi].0)
            .collect();

        for &(gid, pid, _) in &matches {
            if let Some(&prev) = last_partner.get(&gid) {
                if prev != pid {
                    switches += 1;
                }
            }
            last_partner.insert(gid, pid);
        }

        out.push(FrameMatch {
            t: frame.t,
            matches,
            misses,
            false_positives,
        });
    }

    MatchSequence {
        frames: out,
        switches,
    }
}

/// CLEAR-MOT scoreboard. Counts are over the resampled timeline;
/// everything below `switches` is a percentage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearMotScores {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub switches: u64,
    /// Ground-truth boxes on the timeline (TP + FN).
    pub gt_boxes: u64,
    pub n_gt_objects: u64,
    pub n_pred_objects: u64,
    /// 100 · (1 − (FN + FP + switches) / GT). Can be negative.
    pub mota: f64,
    /// Mean IOU over true positives, as a percentage.
    pub motp: f64,
    pub recall: f64,
    pub precision: f64,
    /// Ground-truth objects matched at least once.
    pub gt_pct: f64,
    /// Predicted tracks matched at least once.
    pub pred_pct: f64,
    /// Mostly tracked: objects covered in ≥ 80% of their present frames.
    pub mt_pct: f64,
    /// Mostly lost: objects covered in ≤ 20% of their present frames.
    pub ml_pct: f64,
    pub switches_per_gt: f64,
}

/// Condenses a matched timeline into CLEAR-MOT scores. Ratios whose
/// denominator is empty are reported as 0.
pub fn clearmot(seq: &MatchSequence, frames: &[AlignedFrame]) -> ClearMotScores {
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_count = 0u64;
    let mut iou_sum = 0.0;
    // Per ground-truth object: (frames present, frames matched).
    let mut gt_frames: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    let mut pred_seen: BTreeMap<u64, bool> = BTreeMap::new();

    for frame in frames {
        for &(gid, _) in &frame.gt {
            gt_frames.entry(gid).or_insert((0, 0)).0 += 1;
        }
        for &(pid, _) in &frame.pred {
            pred_seen.entry(pid).or_insert(false);
        }
    }
    for fm in &seq.frames {
        tp += fm.matches.len() as u64;
        fp += fm.false_positives.len() as u64;
        fn_count += fm.misses.len() as u64;
        for &(gid, pid, iou) in &fm.matches {
            iou_sum += iou;
            gt_frames.entry(gid).or_insert((0, 0)).1 += 1;
            pred_seen.insert(pid, true);
        }
    }

    let gt_boxes = tp + fn_count;
    let n_gt = gt_frames.len() as u64;
    let n_pred = pred_seen.len() as u64;
    let pct = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            100.0 * num as f64 / den as f64
        }
    };

    let mut mt = 0u64;
    let mut ml = 0u64;
    let mut gt_covered = 0u64;
    for &(present, matched) in gt_frames.values() {
        let ratio = matched as f64 / present as f64;
        if ratio >= 0.8 {
            mt += 1;
        }
        if ratio <= 0.2 {
            ml += 1;
        }
        if matched > 0 {
            gt_covered += 1;
        }
    }
    let pred_covered = pred_seen.values().filter(|&&v| v).count() as u64;

    ClearMotScores {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_count,
        switches: seq.switches,
        gt_boxes,
        n_gt_objects: n_gt,
        n_pred_objects: n_pred,
        mota: if gt_boxes == 0 {
            0.0
        } else {
            100.0 * (1.0 - (fn_count + fp + seq.switches) as f64 / gt_boxes as f64)
        },
        motp: if tp == 0 {
            0.0
        } else {
            100.0 * iou_sum / tp as f64
        },
        recall: pct(tp, gt_boxes),
        precision: pct(tp, tp + fp),
        gt_pct: pct(gt_covered, n_gt),
        pred_pct: pct(pred_covered, n_pred),
        mt_pct: pct(mt, n_gt),
        ml_pct: pct(ml, n_gt),
        switches_per_gt: if n_gt == 0 {
            0.0
        } else {
            seq.switches as f64 / n_gt as f64
        },
    }
}
