//! Footprint-IOU association: one-stage (KIOU), two-stage by confidence
//! (Byte), and cross-camera detection fusion by greedy NMS.

use crate::types::Box3D;

use super::hungarian::solve_assignment;
use super::Detection;

/// Cost standing in for "forbidden" in the padded assignment matrices; large
/// enough that no optimal solution touches it, small enough to stay exact in
/// f64 sums.
const FORBIDDEN: f64 = 1e6;

/// Bird's-eye intersection-over-union of two boxes' footprint rectangles.
pub fn iou_bev(a: &Box3D, b: &Box3D) -> f64 {
    let (ax0, ax1, ay0, ay1) = a.footprint();
    let (bx0, bx1, by0, by1) = b.footprint();
    let ix = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let iy = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = ix * iy;
    if inter == 0.0 {
        return 0.0;
    }
    let union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter;
    inter / union
}

/// Association outcome as index triples into the input slices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Association {
    /// (track index, detection index) pairs.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Globally optimal IOU assignment with every matched pair at or above
/// `min_iou`.
///
/// Solved as a minimum-cost square assignment on an (n+m)-padded matrix:
/// real pairs cost 1 − IOU (forbidden below the threshold), each item's
/// "stay unmatched" dummy costs 1 − min_iou — the cost of a pair at exactly
/// the threshold — and dummy-to-dummy pairs are free. Minimizing total cost
/// maximizes total matched IOU plus a (1 − 2·min_iou) bonus per match, so a
/// feasible pair is always preferred over leaving both items unmatched, and
/// ties between equal-cardinality matchings break toward higher total IOU.
pub fn associate_kiou(tracks: &[Box3D], detections: &[Box3D], min_iou: f64) -> Association {
    let n = tracks.len();
    let m = detections.len();
    if n == 0 || m == 0 {
        return Association {
            matches: Vec::new(),
            unmatched_tracks: (0..n).collect(),
            unmatched_detections: (0..m).collect(),
        };
    }

    let size = n + m;
    let unmatched_cost = 1.0 - min_iou;
    let mut cost = vec![vec![FORBIDDEN; size]; size];
    for (i, t) in tracks.iter().enumerate() {
        for (j, d) in detections.iter().enumerate() {
            let iou = iou_bev(t, d);
            if iou >= min_iou {
                cost[i][j] = 1.0 - iou;
            }
        }
        cost[i][m + i] = unmatched_cost; // track i stays unmatched
    }
    for j in 0..m {
        cost[n + j][j] = unmatched_cost; // detection j stays unmatched
        for i in 0..n {
            cost[n + j][m + i] = 0.0; // dummy–dummy
        }
    }

    let assign = solve_assignment(&cost);
    let mut matches = Vec::new();
    let mut unmatched_tracks = Vec::new();
    let mut unmatched_detections: Vec<usize> = Vec::new();
    for (i, _) in tracks.iter().enumerate() {
        let j = assign[i];
        if j < m && cost[i][j] < FORBIDDEN {
            matches.push((i, j));
        } else {
            unmatched_tracks.push(i);
        }
    }
    let matched_dets: Vec<usize> = matches.iter().map(|&(_, j)| j).collect();
    for j in 0..m {
        if !matched_dets.contains(&j) {
            unmatched_detections.push(j);
        }
    }
    Association {
        matches,
        unmatched_tracks,
        unmatched_detections,
    }
}

/// Byte association outcome; unlike plain [`Association`], detections that
/// went unmatched split by confidence band, because only the high band may
/// seed new tracks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteAssociation {
    /// (track index, detection index) pairs from both stages.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    /// Unmatched detections with confidence above the high threshold — the
    /// only ones allowed to spawn tracks.
    pub new_track_detections: Vec<usize>,
}

/// Two-stage association: tracks first compete for high-confidence
/// detections (conf > `high`); leftover tracks then get a second chance on
/// the low band (`low` ≤ conf ≤ `high`). Detections below `low` are
/// discarded entirely, and only high-band leftovers may seed new tracks.
pub fn associate_byte(
    tracks: &[Box3D],
    detections: &[(Box3D, f64)],
    min_iou: f64,
    high: f64,
    low: f64,
) -> ByteAssociation {
    let high_idx: Vec<usize> = (0..detections.len())
        .filter(|&j| detections[j].1 > high)
        .collect();
    let low_idx: Vec<usize> = (0..detections.len())
        .filter(|&j| detections[j].1 <= high && detections[j].1 >= low)
        .collect();

    let high_boxes: Vec<Box3D> = high_idx.iter().map(|&j| detections[j].0).collect();
    let stage1 = associate_kiou(tracks, &high_boxes, min_iou);

    let remaining_tracks: Vec<usize> = stage1.unmatched_tracks.clone();
    let remaining_boxes: Vec<Box3D> = remaining_tracks.iter().map(|&i| tracks[i]).collect();
    let low_boxes: Vec<Box3D> = low_idx.iter().map(|&j| detections[j].0).collect();
    let stage2 = associate_kiou(&remaining_boxes, &low_boxes, min_iou);

    let mut matches: Vec<(usize, usize)> = stage1
        .matches
        .iter()
        .map(|&(i, j)| (i, high_idx[j]))
        .collect();
    matches.extend(
        stage2
            .matches
            .iter()
            .map(|&(i, j)| (remaining_tracks[i], low_idx[j])),
    );
    let unmatched_tracks: Vec<usize> = stage2
        .unmatched_tracks
        .iter()
        .map(|&i| remaining_tracks[i])
        .collect();
    let new_track_detections: Vec<usize> = stage1
        .unmatched_detections
        .iter()
        .map(|&j| high_idx[j])
        .collect();

    ByteAssociation {
        matches,
        unmatched_tracks,
        new_track_detections,
    }
}

/// Cross-camera detection fusion: greedy NMS by descending confidence.
///
/// Detections are visited best-first (ties broken by camera name, then
/// input order, so the result is deterministic); a detection survives
/// unless its footprint IOU with an already-kept detection of the same
/// direction exceeds `iou_threshold`. EB and WB never suppress each other —
/// they occupy disjoint roadway spaces.
pub fn fuse_detections(detections: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        detections[b]
            .confidence
            .total_cmp(&detections[a].confidence)
            .then_with(|| detections[a].camera.cmp(&detections[b].camera))
            .then_with(|| a.cmp(&b))
    });

    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        let suppressed = kept.iter().any(|&k| {
            detections[k].box3d.direction == detections[i].box3d.direction
                && iou_bev(&detections[k].box3d, &detections[i].box3d) > iou_threshold
        });
        if !suppressed {
            kept.push(i);
        }
    }
    // Present survivors in input order, not confidence order.
    kept.sort_unstable();
    kept.iter().map(|&i| detections[i].clone()).collect()
}
