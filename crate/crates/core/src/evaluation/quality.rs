//! Annotation-quality diagnostics.
//!
//! Ground truth has no deeper ground truth to score against, so its
//! accuracy is estimated from internal consistency: the same vehicle seen
//! by two cameras should sit at one roadway position (cross-camera
//! deviation), a trajectory should not wiggle (total variation), and
//! annotated dimensions can be checked against manufacturer specs for
//! vehicles whose make and model are identifiable. A time-space diagram
//! generator rounds the module out for visual inspection of match output.

use std::collections::BTreeMap;

use crate::geometry::CameraProjection;
use crate::timesync::{fit_spline, TrajectorySpline, WeightedObservation};
use crate::types::{Box3D, Direction, VehicleClass};
use crate::util::{mean, sample_std};

use super::{AlignedFrame, EvalError, MatchSequence};

/// Two roadway positions `(x, y)` that should coincide.
pub type PositionPair = ((f64, f64), (f64, f64));

/// Coincidence pairs grouped by the camera whose image they belong to.
pub type PairsByCamera = BTreeMap<String, Vec<PositionPair>>;

/// Mean absolute longitudinal and lateral deviation, in feet, over pairs
/// of roadway positions that should coincide. `(0, 0)` for no pairs.
pub fn ccde(pairs: &[PositionPair]) -> (f64, f64) {
    if pairs.is_empty() {
        return (0.0, 0.0);
    }
    let n = pairs.len() as f64;
    let dx: f64 = pairs.iter().map(|&((ax, _), (bx, _))| (ax - bx).abs()).sum();
    let dy: f64 = pairs.iter().map(|&((_, ay), (_, by))| (ay - by).abs()).sum();
    (dx / n, dy / n)
}

/// Position of a sighting series at time `t`: the spline where one was
/// fitted, otherwise linear interpolation between the bracketing
/// sightings. `None` outside the sighted range.
fn interp_xy(sorted: &[(f64, f64, f64)], spline: Option<&TrajectorySpline>, t: f64) -> Option<(f64, f64)> {
    let (&first, &last) = (sorted.first()?, sorted.last()?);
    if t < first.0 || t > last.0 {
        return None;
    }
    if let Some(s) = spline {
        let (lo, hi) = s.domain();
        if t >= lo && t <= hi {
            if let Ok(p) = s.eval(t) {
                return Some(p);
            }
        }
    }
    let idx = sorted.partition_point(|&(s, _, _)| s <= t);
    if idx == 0 {
        return Some((first.1, first.2));
    }
    let (t0, x0, y0) = sorted[idx - 1];
    let Some(&(t1, x1, y1)) = sorted.get(idx) else {
        return Some((sorted[idx - 1].1, sorted[idx - 1].2));
    };
    let u = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
    Some((x0 + u * (x1 - x0), y0 + u * (y1 - y0)))
}

/// Builds the coincidence pairs for one vehicle seen by several cameras.
///
/// Input: per-camera sightings `(t, x, y)` in roadway feet. For every
/// ordered camera pair (source, target), each source sighting inside the
/// target's sighted range is paired with the target's interpolated
/// position at that instant (spline when the target has at least four
/// sightings). Both orders are generated, so the flattened pairs are
/// symmetric under relabeling the cameras. Pairs are grouped by the
/// target camera — the one whose image the pair can be projected into.
pub fn cross_camera_pairs(
    sightings: &BTreeMap<String, Vec<(f64, f64, f64)>>,
) -> PairsByCamera {
    // Sort and fit once per camera.
    type Prepared = (Vec<(f64, f64, f64)>, Option<TrajectorySpline>);
    let mut prepared: BTreeMap<&str, Prepared> = BTreeMap::new();
    for (camera, raw) in sightings {
        let mut sorted = raw.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let spline = if sorted.len() >= 4 {
            let obs: Vec<WeightedObservation> = sorted
                .iter()
                .map(|&(t, x, y)| WeightedObservation {
                    t,
                    x,
                    y,
                    weight: 1.0,
                    camera: camera.clone(),
                    frame_index: 0,
                })
                .collect();
            fit_spline(&obs).ok()
        } else {
            None
        };
        prepared.insert(camera, (sorted, spline));
    }

    let mut out = PairsByCamera::new();
    for (&source, (source_sightings, _)) in &prepared {
        for (&target, (target_sightings, target_spline)) in &prepared {
            if source == target {
                continue;
            }
            for &(t, x, y) in source_sightings {
                if let Some(p) = interp_xy(target_sightings, target_spline.as_ref(), t) {
                    out.entry(target.to_string()).or_default().push(((x, y), p));
                }
            }
        }
    }
    out
}

/// Mean pixel distance between coincidence pairs after projecting both
/// roadway positions (on the road surface) into the target camera's image.
///
/// Cameras without a projection are skipped, as are pairs the projection
/// rejects (points on the camera's principal plane); both are logged.
/// `0.0` when nothing is projectable.
pub fn ccpe(
    pairs_by_target: &PairsByCamera,
    projections: &BTreeMap<String, CameraProjection>,
) -> f64 {
    let mut sum = 0.0;
    let mut n = 0u64;
    for (camera, pairs) in pairs_by_target {
        let Some(proj) = projections.get(camera) else {
            log::warn!("no projection for camera {camera}; skipping {} pairs", pairs.len());
            continue;
        };
        let mut rejected = 0u64;
        for &((ax, ay), (bx, by)) in pairs {
            let a = proj.project(&crate::geometry::RoadPoint::plane(ax, ay));
            let b = proj.project(&crate::geometry::RoadPoint::plane(bx, by));
            match (a, b) {
                (Ok(pa), Ok(pb)) => {
                    sum += pa.dist(&pb);
                    n += 1;
                }
                _ => rejected += 1,
            }
        }
        if rejected > 0 {
            log::warn!("{rejected} pairs for camera {camera} were unprojectable");
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Smoothness of a position series: total absolute movement divided by net
/// extent. Exactly 1 for monotone motion, larger for anything that backs
/// up. Undefined (error) for series that never move or have fewer than two
/// samples.
pub fn total_variation(positions: &[f64]) -> Result<f64, EvalError> {
    if positions.len() < 2 {
        return Err(EvalError::ZeroDistance);
    }
    let lo = positions.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = positions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        let tv: f64 = positions.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        Ok(tv / (hi - lo))
    } else {
        Err(EvalError::ZeroDistance)
    }
}

/// Error statistics for one group of dimension comparisons. Axis order is
/// `[length, width, height]`; errors are annotated − true, in feet.
#[derive(Debug, Clone, PartialEq)]
pub struct DimStat {
    pub count: usize,
    pub mean: [f64; 3],
    /// Sample standard deviation (0 for fewer than two comparisons).
    pub std: [f64; 3],
    /// Share of comparisons within one foot of truth, per axis.
    pub under_one_ft_pct: [f64; 3],
}

/// Dimension accuracy per vehicle class and overall.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionStats {
    pub per_class: BTreeMap<VehicleClass, DimStat>,
    pub overall: DimStat,
}

fn dim_stat(errors: &[[f64; 3]]) -> DimStat {
    let axis = |i: usize| -> Vec<f64> { errors.iter().map(|e| e[i]).collect() };
    let mut mean_out = [0.0; 3];
    let mut std_out = [0.0; 3];
    let mut under = [0.0; 3];
    for i in 0..3 {
        let vals = axis(i);
        mean_out[i] = mean(&vals);
        std_out[i] = sample_std(&vals);
        if !vals.is_empty() {
            under[i] =
                100.0 * vals.iter().filter(|v| v.abs() <= 1.0).count() as f64 / vals.len() as f64;
        }
    }
    DimStat {
        count: errors.len(),
        mean: mean_out,
        std: std_out,
        under_one_ft_pct: under,
    }
}

/// Compares annotated dimensions against known true dimensions. Each entry
/// is `(class, annotated [l, w, h], true [l, w, h])` in feet.
pub fn dimension_error_stats(comparisons: &[(VehicleClass, [f64; 3], [f64; 3])]) -> DimensionStats {
    let err = |&(_, a, t): &(VehicleClass, [f64; 3], [f64; 3])| {
        [a[0] - t[0], a[1] - t[1], a[2] - t[2]]
    };
    let overall: Vec<[f64; 3]> = comparisons.iter().map(err).collect();
    let mut by_class: BTreeMap<VehicleClass, Vec<[f64; 3]>> = BTreeMap::new();
    for c in comparisons {
        by_class.entry(c.0).or_default().push(err(c));
    }
    DimensionStats {
        per_class: by_class
            .into_iter()
            .map(|(class, errs)| (class, dim_stat(&errs)))
            .collect(),
        overall: dim_stat(&overall),
    }
}

/// How one plotted box relates to ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchStatus {
    Tp,
    Fp,
    Fn,
}

/// One dot of a time-space diagram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimespacePoint {
    pub t: f64,
    /// Longitudinal position, feet.
    pub x: f64,
    /// Prediction id for covered and fabricated boxes, ground-truth id for
    /// missed ones.
    pub id: u64,
    pub status: MatchStatus,
}

/// Buckets every matched timeline box into per-(direction, lane)
/// time-space series. Lane 1 is nearest the median; covered ground truth
/// plots the prediction's box, missed ground truth its own box, and
/// uncovered predictions theirs.
pub fn emit_timespace(
    seq: &MatchSequence,
    frames: &[AlignedFrame],
    lane_width: f64,
) -> BTreeMap<(Direction, u32), Vec<TimespacePoint>> {
    debug_assert_eq!(seq.frames.len(), frames.len());
    let lane = |b: &Box3D| (b.direction, (b.y.abs() / lane_width).floor() as u32 + 1);
    let mut out: BTreeMap<(Direction, u32), Vec<TimespacePoint>> = BTreeMap::new();
    let mut push = |b: &Box3D, p: TimespacePoint| out.entry(lane(b)).or_default().push(p);

    for (fm, frame) in seq.frames.iter().zip(frames) {
        let find = |side: &[(u64, Box3D)], id: u64| {
            side.iter().find(|&&(i, _)| i == id).map(|&(_, b)| b)
        };
        for &(_, pid, _) in &fm.matches {
            if let Some(b) = find(&frame.pred, pid) {
                push(&b, TimespacePoint { t: fm.t, x: b.x, id: pid, status: MatchStatus::Tp });
            }
        }
        for &gid in &fm.misses {
            if let Some(b) = find(&frame.gt, gid) {
                push(&b, TimespacePoint { t: fm.t, x: b.x, id: gid, status: MatchStatus::Fn });
            }
        }
        for &pid in &fm.false_positives {
            if let Some(b) = find(&frame.pred, pid) {
                push(&b, TimespacePoint { t: fm.t, x: b.x, id: pid, status: MatchStatus::Fp });
            }
        }
    }
    out
}
