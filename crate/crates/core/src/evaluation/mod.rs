//! Tracking and annotation-quality evaluation.
//!
//! Ground truth and tracker output rarely share timestamps: annotations
//! arrive at whatever rate the source cameras ran, tracker samples sit on
//! the tracker's own clock. Everything here therefore starts from a common
//! resampled timeline — a fixed-rate grid over the window where both sides
//! have data, with ground truth resampled by smoothing splines and
//! predictions linearly interpolated. On top of that alignment the module
//! scores tracking (CLEAR-MOT in [`clearmot`], HOTA in [`hota`]), detection
//! quality ([`ap`]), and the annotations themselves ([`quality`]:
//! cross-camera deviation, smoothness, dimension accuracy, time-space
//! diagrams).
//!
//! All public scores are percentages in `[0, 100]` unless a unit is stated.

mod ap;
mod clearmot;
mod hota;
mod quality;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::timesync::{fit_spline, TrajectorySpline, WeightedObservation};
use crate::types::Box3D;

pub use ap::{average_precision, PrCurve};
pub use clearmot::{clearmot, match_frames, ClearMotScores, FrameMatch, MatchSequence};
pub use hota::{hota, HotaAtThreshold, HotaSummary};
pub use quality::{
    ccde, ccpe, cross_camera_pairs, dimension_error_stats, emit_timespace, total_variation,
    DimStat, DimensionStats, MatchStatus, TimespacePoint,
};

/// Evaluation failures.
#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    /// Total variation is a ratio over distance traveled; a series that
    /// never moves (or has fewer than two samples) has no defined value.
    #[error("total variation is undefined for a series with zero extent")]
    ZeroDistance,
}

/// Knobs for scene evaluation.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Common-timeline rate in Hz for resampling both sides.
    pub resample_rate: f64,
    /// Minimum IOU for a prediction to count as covering a ground-truth box
    /// in the CLEAR-MOT matching.
    pub iou_threshold: f64,
    /// IOU thresholds at which detection average precision is reported.
    pub ap_thresholds: Vec<f64>,
    /// Localization thresholds integrated over for HOTA.
    pub hota_thresholds: Vec<f64>,
    /// Lane width in feet for time-space diagram bucketing.
    pub lane_width: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            resample_rate: 30.0,
            iou_threshold: 0.3,
            ap_thresholds: vec![0.3, 0.5, 0.7],
            hota_thresholds: (1..20).map(|k| k as f64 * 0.05).collect(),
            lane_width: 12.0,
        }
    }
}

impl EvalConfig {
    /// Rejects configs whose knobs are outside their meaningful ranges.
    /// Comparisons are written so NaN fails them.
    pub fn validate(&self) -> Result<(), EvalError> {
        let require = |ok: bool, msg: String| {
            if ok {
                Ok(())
            } else {
                Err(EvalError::InvalidConfig(msg))
            }
        };
        require(
            self.resample_rate > 0.0,
            format!("resample_rate must be positive, got {}", self.resample_rate),
        )?;
        require(
            self.iou_threshold > 0.0 && self.iou_threshold < 1.0,
            format!("iou_threshold must lie in (0, 1), got {}", self.iou_threshold),
        )?;
        for (name, list) in [
            ("ap_thresholds", &self.ap_thresholds),
            ("hota_thresholds", &self.hota_thresholds),
        ] {
            require(!list.is_empty(), format!("{name} is empty"))?;
            require(
                list.iter().all(|a| *a > 0.0 && *a < 1.0),
                format!("{name} must lie in (0, 1)"),
            )?;
            require(
                list.windows(2).all(|w| w[0] < w[1]),
                format!("{name} must be strictly increasing"),
            )?;
        }
        require(
            self.lane_width > 0.0,
            format!("lane_width must be positive, got {}", self.lane_width),
        )?;
        Ok(())
    }
}

/// Timestamped boxes per object id — the shape of both ground truth
/// (annotations per labeled vehicle) and predictions (samples per track).
pub type ObjectSeries = BTreeMap<u64, Vec<(f64, Box3D)>>;

/// One tick of the common timeline: every object present on each side,
/// resampled to this instant.
#[derive(Debug, Clone)]
pub struct AlignedFrame {
    pub t: f64,
    pub gt: Vec<(u64, Box3D)>,
    pub pred: Vec<(u64, Box3D)>,
}

/// The window both sides cover: the intersection of their time ranges, or
/// the range of whichever side has data when the other is empty.
fn evaluation_window(gt: &ObjectSeries, pred: &ObjectSeries) -> Option<(f64, f64)> {
    let range = |side: &ObjectSeries| -> Option<(f64, f64)> {
        let mut r: Option<(f64, f64)> = None;
        for samples in side.values() {
            for &(t, _) in samples {
                let (lo, hi) = r.get_or_insert((t, t));
                *lo = lo.min(t);
                *hi = hi.max(t);
            }
        }
        r
    };
    match (range(gt), range(pred)) {
        (Some((g0, g1)), Some((p0, p1))) => {
            let (lo, hi) = (g0.max(p0), g1.min(p1));
            (lo <= hi).then_some((lo, hi))
        }
        (one, two) => one.or(two),
    }
}

/// Fixed-rate tick times covering `[t0, t1]`, starting exactly at `t0`.
fn grid(t0: f64, t1: f64, rate: f64) -> Vec<f64> {
    let dt = 1.0 / rate;
    // Absorb accumulated floating-point error so a tick landing a hair past
    // t1 is still kept.
    let n = ((t1 - t0) / dt + 1e-9).floor() as usize + 1;
    (0..n).map(|k| t0 + k as f64 * dt).collect()
}

/// The annotation whose timestamp is nearest to `t` (earlier one on ties).
fn nearest(samples: &[(f64, Box3D)], t: f64) -> &Box3D {
    let idx = samples.partition_point(|&(s, _)| s < t);
    match (idx.checked_sub(1), samples.get(idx)) {
        (Some(lo), Some(&(hi_t, _))) => {
            let lo_t = samples[lo].0;
            if (t - lo_t) <= (hi_t - t) {
                &samples[lo].1
            } else {
                &samples[idx].1
            }
        }
        (Some(lo), None) => &samples[lo].1,
        (None, _) => &samples[0].1,
    }
}

/// Position of one object at `t` by linear interpolation between its
/// bracketing samples. `None` outside the sampled range.
fn lerp_position(samples: &[(f64, Box3D)], t: f64) -> Option<(f64, f64)> {
    let (first, last) = (samples.first()?, samples.last()?);
    if t < first.0 || t > last.0 {
        return None;
    }
    let idx = samples.partition_point(|&(s, _)| s <= t);
    if idx == 0 {
        return Some((first.1.x, first.1.y));
    }
    let (t0, a) = samples[idx - 1];
    let Some(&(t1, b)) = samples.get(idx) else {
        return Some((a.x, a.y));
    };
    let u = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
    Some((a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)))
}

/// Resamples one object onto the ticks inside its own sampled range,
/// returning `(tick index, box)` pairs. Positions come from a smoothing
/// spline when the object has enough samples (and the fit succeeds) or
/// linear interpolation otherwise; dimensions, direction, and class are
/// taken from the nearest original sample.
fn resample_object(samples: &[(f64, Box3D)], ticks: &[f64], allow_spline: bool) -> Vec<(usize, Box3D)> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted.is_empty() {
        return Vec::new();
    }

    let spline: Option<TrajectorySpline> = if allow_spline && sorted.len() >= 4 {
        let obs: Vec<WeightedObservation> = sorted
            .iter()
            .map(|&(t, b)| WeightedObservation {
                t,
                x: b.x,
                y: b.y,
                weight: 1.0,
                camera: String::new(),
                frame_index: 0,
            })
            .collect();
        let fit = fit_spline(&obs);
        if fit.is_err() {
            log::warn!("spline resampling failed; falling back to linear interpolation");
        }
        fit.ok()
    } else {
        None
    };

    let mut out = Vec::new();
    for (k, &t) in ticks.iter().enumerate() {
        let pos = match &spline {
            Some(s) => {
                let (lo, hi) = s.domain();
                (t >= lo && t <= hi).then(|| s.eval(t).ok()).flatten()
            }
            None => lerp_position(&sorted, t),
        };
        let Some((x, y)) = pos else { continue };
        let template = nearest(&sorted, t);
        out.push((k, Box3D { x, y, ..*template }));
    }
    out
}

/// Resamples every ground-truth object onto the tick grid. Objects with at
/// least four annotations are smoothed by spline fitting; shorter ones fall
/// back to plain linear interpolation.
pub fn resample_ground_truth(gt: &ObjectSeries, ticks: &[f64]) -> ObjectSeries {
    gt.iter()
        .map(|(&id, samples)| {
            let rs = resample_object(samples, ticks, true)
                .into_iter()
                .map(|(k, b)| (ticks[k], b))
                .collect();
            (id, rs)
        })
        .collect()
}

/// Linearly interpolates every predicted track onto the tick grid.
pub fn interpolate_predictions(pred: &ObjectSeries, ticks: &[f64]) -> ObjectSeries {
    pred.iter()
        .map(|(&id, samples)| {
            let rs = resample_object(samples, ticks, false)
                .into_iter()
                .map(|(k, b)| (ticks[k], b))
                .collect();
            (id, rs)
        })
        .collect()
}

/// Builds the common timeline: a fixed-rate grid over the shared window
/// with both sides resampled onto it. Empty when neither side has data or
/// their time ranges don't intersect.
pub fn align(gt: &ObjectSeries, pred: &ObjectSeries, cfg: &EvalConfig) -> Vec<AlignedFrame> {
    let Some((t0, t1)) = evaluation_window(gt, pred) else {
        return Vec::new();
    };
    let ticks = grid(t0, t1, cfg.resample_rate);
    let mut frames: Vec<AlignedFrame> = ticks
        .iter()
        .map(|&t| AlignedFrame {
            t,
            gt: Vec::new(),
            pred: Vec::new(),
        })
        .collect();
    for (&id, samples) in gt {
        for (k, b) in resample_object(samples, &ticks, true) {
            frames[k].gt.push((id, b));
        }
    }
    for (&id, samples) in pred {
        for (k, b) in resample_object(samples, &ticks, false) {
            frames[k].pred.push((id, b));
        }
    }
    frames
}

/// One row of the tracking scoreboard. Every field is a percentage except
/// `switches_per_gt` (identity switches per ground-truth object).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRow {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub mota: f64,
    pub motp: f64,
    pub recall: f64,
    pub precision: f64,
    /// Ground-truth objects covered by at least one prediction, ever.
    pub gt_pct: f64,
    /// Predicted tracks that ever cover a ground-truth object.
    pub pred_pct: f64,
    pub mt_pct: f64,
    pub ml_pct: f64,
    pub switches_per_gt: f64,
}

/// Scores for a set of scenes plus their unweighted mean.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub per_scene: BTreeMap<String, ScoreRow>,
    pub aggregate: ScoreRow,
}

impl MetricsReport {
    /// Collects per-scene rows; the aggregate is the unweighted mean over
    /// scenes (zeros if there are none).
    pub fn from_scenes(per_scene: BTreeMap<String, ScoreRow>) -> Self {
        let n = per_scene.len().max(1) as f64;
        let sum = |f: fn(&ScoreRow) -> f64| per_scene.values().map(f).sum::<f64>() / n;
        let aggregate = ScoreRow {
            hota: sum(|r| r.hota),
            deta: sum(|r| r.deta),
            assa: sum(|r| r.assa),
            mota: sum(|r| r.mota),
            motp: sum(|r| r.motp),
            recall: sum(|r| r.recall),
            precision: sum(|r| r.precision),
            gt_pct: sum(|r| r.gt_pct),
            pred_pct: sum(|r| r.pred_pct),
            mt_pct: sum(|r| r.mt_pct),
            ml_pct: sum(|r| r.ml_pct),
            switches_per_gt: sum(|r| r.switches_per_gt),
        };
        Self { per_scene, aggregate }
    }
}

/// Everything computed while scoring one scene, from the aligned timeline
/// down to the final scoreboard row.
#[derive(Debug, Clone)]
pub struct SceneEvaluation {
    pub frames: Vec<AlignedFrame>,
    pub seq: MatchSequence,
    pub clear: ClearMotScores,
    pub hota: HotaSummary,
    pub row: ScoreRow,
}

/// Scores one scene end to end: aligns both sides onto the common
/// timeline, runs the CLEAR-MOT matching and HOTA, and condenses the
/// results into a scoreboard row.
pub fn evaluate_scene(
    gt: &ObjectSeries,
    pred: &ObjectSeries,
    cfg: &EvalConfig,
) -> Result<SceneEvaluation, EvalError> {
    cfg.validate()?;
    let frames = align(gt, pred, cfg);
    let seq = match_frames(&frames, cfg.iou_threshold);
    let clear = clearmot(&seq, &frames);
    let hota = hota::hota(&frames, &cfg.hota_thresholds);
    let row = ScoreRow {
        hota: hota.hota,
        deta: hota.deta,
        assa: hota.assa,
        mota: clear.mota,
        motp: clear.motp,
        recall: clear.recall,
        precision: clear.precision,
        gt_pct: clear.gt_pct,
        pred_pct: clear.pred_pct,
        mt_pct: clear.mt_pct,
        ml_pct: clear.ml_pct,
        switches_per_gt: clear.switches_per_gt,
    };
    Ok(SceneEvaluation {
        frames,
        seq,
        clear,
        hota,
        row,
    })
}
