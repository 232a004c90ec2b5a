//! Per-camera clock synchronization.
//!
//! Cameras along the corridor timestamp their frames with independent,
//! drift-free clocks that disagree by a constant per-camera offset, and the
//! stamps themselves are quantized to 0.01 s. This module recovers the timing
//! in three stages:
//!
//! 1. **Pairwise offsets** — vehicles visible in two cameras cross the same
//!    x positions at the same true time, so the mean stamp difference at
//!    shared x samples estimates the clock offset between the pair
//!    ([`pairwise_offset`]), and a corridor-ordered chain of pairs anchors
//!    every camera to the first ([`chain_offsets`]).
//! 2. **Trajectory splines** — weighted least-squares cubic B-splines per
//!    vehicle ([`fit_spline`], [`TrajectorySpline`]) give smooth references
//!    against which per-frame timing noise is measurable.
//! 3. **Per-frame residuals** — each frame gets a bounded correction ε
//!    minimizing the weighted x-error of its observations against their
//!    splines ([`estimate_residuals`]), and annotations can be nudged toward
//!    their spline by a pixel-capped amount ([`shift_annotations`]).
//!
//! Corrected time is always `t_raw + offset + residual`.

mod spline;

pub use spline::{fit_spline, TrajectorySpline};

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::util::golden_section;

/// Hard bound on per-frame residual corrections: one skipped frame at 30 fps
/// plus the 0.01 s stamp quantization.
pub const RESIDUAL_BOUND: f64 = 1.0 / 30.0 + 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum TimesyncError {
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("observations span zero duration")]
    ZeroDuration,
    #[error("t = {t} outside spline domain [{t_min}, {t_max}]")]
    OutsideDomain { t: f64, t_min: f64, t_max: f64 },
    #[error("no shared objects with overlapping x-range between the cameras")]
    NoSharedObjects,
    #[error("camera offsets do not form a single connected chain")]
    DisconnectedChain,
}

/// One camera frame's complete timing record.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStamp {
    pub camera: String,
    pub frame_index: u32,
    /// Stamp as written by the camera (epoch seconds, 0.01 s quantized).
    pub t_raw: f64,
    /// Constant per-camera clock offset.
    pub offset: f64,
    /// Bounded per-frame correction, |residual| ≤ [`RESIDUAL_BOUND`].
    pub residual: f64,
    /// `t_raw + offset + residual`.
    pub t_corrected: f64,
}

impl FrameStamp {
    pub fn new(camera: impl Into<String>, frame_index: u32, t_raw: f64, offset: f64, residual: f64) -> Self {
        debug_assert!(residual.abs() <= RESIDUAL_BOUND + 1e-12);
        FrameStamp {
            camera: camera.into(),
            frame_index,
            t_raw,
            offset,
            residual,
            t_corrected: t_raw + offset + residual,
        }
    }
}

/// A single annotated position with its timing weight: `weight` is the pixel
/// shift produced by a one-foot move at this image location, so spatial error
/// bounds in pixels convert to feet by dividing by it.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedObservation {
    /// Seconds; which correction stages are baked in is the caller's choice.
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// Pixels per foot; must be > 0.
    pub weight: f64,
    pub camera: String,
    pub frame_index: u32,
}

/// Result of a pairwise clock comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseOffset {
    /// mean(τ_a − τ_b) over all samples: the amount camera *b*'s clock lags
    /// camera *a*'s, i.e. o_b − o_a under `corrected = raw + offset`.
    pub offset: f64,
    /// Shared objects that contributed samples.
    pub used_objects: usize,
    /// Objects excluded because x reversed within the shared range.
    pub excluded_non_monotone: Vec<u64>,
}

/// Estimates the clock offset between two cameras from objects they both
/// observed.
///
/// For each shared object, the shared x-interval is sampled at
/// `samples_per_object` uniformly spaced points (cell midpoints, so both
/// cameras can bracket every sample — sampling the interval endpoints would
/// force one camera to clamp to its first/last stamp there, a systematic
/// ~half-frame bias that compounds along a chained corridor); each camera's
/// crossing time τ at a sample is linearly interpolated from its own (x, t)
/// observations, and the pooled mean of τ_a − τ_b over every sample of every
/// object is the offset estimate. Objects whose x is not strictly monotone
/// inside the shared interval are excluded (and reported); if nothing usable
/// remains the cameras share no objects.
pub fn pairwise_offset(
    tracklets_a: &BTreeMap<u64, Vec<WeightedObservation>>,
    tracklets_b: &BTreeMap<u64, Vec<WeightedObservation>>,
    samples_per_object: usize,
) -> Result<PairwiseOffset, TimesyncError> {
    let mut diffs: Vec<f64> = Vec::new();
    let mut used = 0usize;
    let mut excluded = Vec::new();

    for (id, obs_a) in tracklets_a {
        let Some(obs_b) = tracklets_b.get(id) else {
            continue;
        };
        if obs_a.is_empty() || obs_b.is_empty() {
            continue;
        }
        let range = |obs: &[WeightedObservation]| {
            let lo = obs.iter().map(|o| o.x).fold(f64::INFINITY, f64::min);
            let hi = obs.iter().map(|o| o.x).fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        };
        let (alo, ahi) = range(obs_a);
        let (blo, bhi) = range(obs_b);
        let lo = alo.max(blo);
        let hi = ahi.min(bhi);
        if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
            continue;
        }

        let curve_a = crossing_curve(obs_a, lo, hi);
        let curve_b = crossing_curve(obs_b, lo, hi);
        let (Some(curve_a), Some(curve_b)) = (curve_a, curve_b) else {
            log::warn!("object {id} reverses in x within the shared range; excluded from offset estimation");
            excluded.push(*id);
            continue;
        };

        for r in 0..samples_per_object {
            let x_r = lo + (hi - lo) * (r as f64 + 0.5) / samples_per_object as f64;
            diffs.push(interp_time(&curve_a, x_r) - interp_time(&curve_b, x_r));
        }
        used += 1;
    }

    if diffs.is_empty() {
        return Err(TimesyncError::NoSharedObjects);
    }
    Ok(PairwiseOffset {
        offset: diffs.iter().sum::<f64>() / diffs.len() as f64,
        used_objects: used,
        excluded_non_monotone: excluded,
    })
}

/// (x, t) pairs sorted by ascending x, restricted to the shared interval;
/// `None` if x is not strictly monotone there (the crossing time would be
/// ambiguous).
fn crossing_curve(obs: &[WeightedObservation], lo: f64, hi: f64) -> Option<Vec<(f64, f64)>> {
    let mut by_time: Vec<&WeightedObservation> = obs.iter().collect();
    by_time.sort_by(|a, b| a.t.total_cmp(&b.t));
    let in_range: Vec<(f64, f64)> = by_time
        .iter()
        .filter(|o| o.x >= lo && o.x <= hi)
        .map(|o| (o.x, o.t))
        .collect();
    if in_range.len() < 2 {
        return None;
    }
    let increasing = in_range.windows(2).all(|w| w[1].0 > w[0].0);
    let decreasing = in_range.windows(2).all(|w| w[1].0 < w[0].0);
    if !(increasing || decreasing) {
        return None;
    }
    let mut curve = in_range;
    if decreasing {
        curve.reverse();
    }
    Some(curve)
}

/// Linear interpolation of crossing time at `x` from an ascending (x, t)
/// curve; exact observation x-values return that observation's time.
fn interp_time(curve: &[(f64, f64)], x: f64) -> f64 {
    let i = curve.partition_point(|&(cx, _)| cx < x);
    if i == 0 {
        return curve[0].1;
    }
    if i == curve.len() {
        return curve[curve.len() - 1].1;
    }
    let (x0, t0) = curve[i - 1];
    let (x1, t1) = curve[i];
    if x == x0 {
        return t0;
    }
    t0 + (x - x0) * (t1 - t0) / (x1 - x0)
}

/// Anchors a chain of pairwise offsets to the first camera.
///
/// Each entry `(camera_k, camera_k−1, offset)` states o_k = o_{k−1} + offset.
/// The unique camera that never appears on the left is the root and gets
/// offset 0; everything else is a prefix sum along the chain. An empty input
/// yields an empty map (a lone camera has nothing to chain).
pub fn chain_offsets(
    pairwise: &[(String, String, f64)],
) -> Result<BTreeMap<String, f64>, TimesyncError> {
    if pairwise.is_empty() {
        return Ok(BTreeMap::new());
    }
    let mut cameras: BTreeSet<&str> = BTreeSet::new();
    let mut lefts: BTreeSet<&str> = BTreeSet::new();
    let mut edges: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for (k, km1, off) in pairwise {
        cameras.insert(k);
        cameras.insert(km1);
        lefts.insert(k);
        edges.entry(km1).or_default().push((k, *off));
    }
    let roots: Vec<&str> = cameras.iter().filter(|c| !lefts.contains(*c)).cloned().collect();
    let [root] = roots[..] else {
        return Err(TimesyncError::DisconnectedChain);
    };

    let mut offsets: BTreeMap<String, f64> = BTreeMap::new();
    offsets.insert(root.to_string(), 0.0);
    let mut stack = vec![(root, 0.0f64)];
    while let Some((cam, base)) = stack.pop() {
        if let Some(nexts) = edges.get(cam) {
            for (next, off) in nexts {
                if offsets.contains_key(*next) {
                    return Err(TimesyncError::DisconnectedChain);
                }
                offsets.insert(next.to_string(), base + off);
                stack.push((next, base + off));
            }
        }
    }
    if offsets.len() != cameras.len() {
        return Err(TimesyncError::DisconnectedChain);
    }
    Ok(offsets)
}

/// Per-frame residual corrections ε, keyed by (camera, frame index).
///
/// For each frame, ε minimizes Σ (wᵢ·(f_i^x(t + ε) − xᵢ))² over the
/// observations whose object has a spline covering the whole search window
/// [t − bound, t + bound]; the search is golden-section on the clamped
/// interval with 1e-5 s tolerance. Frames with no usable observation get
/// ε = 0 (logged), so every frame has an entry and every entry respects the
/// bound.
pub fn estimate_residuals(
    splines: &BTreeMap<u64, TrajectorySpline>,
    frame_obs: &BTreeMap<(String, u32), Vec<(u64, WeightedObservation)>>,
) -> BTreeMap<(String, u32), f64> {
    let mut out = BTreeMap::new();
    for (key, obs) in frame_obs {
        let usable: Vec<(&TrajectorySpline, &WeightedObservation)> = obs
            .iter()
            .filter_map(|(id, o)| {
                let sp = splines.get(id)?;
                let (d_lo, d_hi) = sp.domain();
                (o.t - RESIDUAL_BOUND >= d_lo && o.t + RESIDUAL_BOUND <= d_hi)
                    .then_some((sp, o))
            })
            .collect();
        if usable.is_empty() {
            log::debug!(
                "frame {}/{} has no observation with full spline coverage; residual defaults to 0",
                key.0,
                key.1
            );
            out.insert(key.clone(), 0.0);
            continue;
        }
        let cost = |eps: f64| {
            usable
                .iter()
                .map(|(sp, o)| {
                    let (fx, _) = sp.eval(o.t + eps).expect("domain coverage pre-checked");
                    let d = o.weight * (fx - o.x);
                    d * d
                })
                .sum::<f64>()
        };
        let (eps, _) = golden_section(cost, -RESIDUAL_BOUND, RESIDUAL_BOUND, 1e-5, 200);
        out.insert(key.clone(), eps.clamp(-RESIDUAL_BOUND, RESIDUAL_BOUND));
    }
    out
}

/// Annotations after spline-guided smoothing, with the applied pixel shifts.
#[derive(Debug, Clone)]
pub struct ShiftedAnnotations {
    /// Same order as the input.
    pub observations: Vec<(u64, WeightedObservation)>,
    /// Signed (x, y) shift applied to each observation, in pixels.
    pub shifts_px: Vec<(f64, f64)>,
}

/// Moves each observation toward its object's spline value at the
/// observation's time, by at most `max_shift_px` (converted to feet through
/// the observation's own weight), per axis. Observations without a covering
/// spline pass through unchanged.
pub fn shift_annotations(
    obs: &[(u64, WeightedObservation)],
    splines: &BTreeMap<u64, TrajectorySpline>,
    max_shift_px: f64,
) -> ShiftedAnnotations {
    let mut observations = Vec::with_capacity(obs.len());
    let mut shifts_px = Vec::with_capacity(obs.len());
    for (id, o) in obs {
        let target = splines.get(id).and_then(|sp| sp.eval(o.t).ok());
        match target {
            None => {
                observations.push((*id, o.clone()));
                shifts_px.push((0.0, 0.0));
            }
            Some((fx, fy)) => {
                let max_ft = max_shift_px / o.weight;
                let dx = (fx - o.x).clamp(-max_ft, max_ft);
                let dy = (fy - o.y).clamp(-max_ft, max_ft);
                let mut shifted = o.clone();
                shifted.x += dx;
                shifted.y += dy;
                observations.push((*id, shifted));
                shifts_px.push((dx * o.weight, dy * o.weight));
            }
        }
    }
    ShiftedAnnotations {
        observations,
        shifts_px,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn obs(t: f64, x: f64) -> WeightedObservation {
        WeightedObservation {
            t,
            x,
            y: 6.0,
            weight: 1.0,
            camera: "p1c1".to_string(),
            frame_index: 0,
        }
    }

    /// Constant-velocity tracklet: x(t) = x0 + v·t observed at 30 fps raw
    /// stamps t_raw = t_true − clock_offset, optionally floor-quantized.
    fn tracklet(
        x0: f64,
        v: f64,
        t0: f64,
        t1: f64,
        clock_offset: f64,
        quantize: bool,
    ) -> Vec<WeightedObservation> {
        let mut out = Vec::new();
        let mut k = 0;
        loop {
            let t_true = t0 + k as f64 / 30.0;
            if t_true > t1 {
                break;
            }
            let mut t_raw = t_true - clock_offset;
            if quantize {
                t_raw = (t_raw * 100.0).floor() / 100.0;
            }
            out.push(obs(t_raw, x0 + v * t_true));
            k += 1;
        }
        out
    }

    #[test]
    fn identical_observations_give_zero_offset() {
        let mut a = BTreeMap::new();
        a.insert(1u64, tracklet(0.0, 100.0, 0.0, 2.0, 0.0, false));
        let est = pairwise_offset(&a, &a, 10).unwrap();
        assert_relative_eq!(est.offset, 0.0, epsilon = 1e-12);
        assert_eq!(est.used_objects, 1);
    }

    #[test]
    fn shifted_clock_is_recovered_exactly_without_quantization() {
        // Camera B's clock runs 0.1 s behind (raw stamps 0.1 smaller), so
        // its correction offset is +0.1 — and with linear motion and no
        // quantization the interpolation is exact.
        let mut a = BTreeMap::new();
        let mut b = BTreeMap::new();
        a.insert(1u64, tracklet(0.0, 100.0, 0.0, 2.0, 0.0, false));
        b.insert(1u64, tracklet(0.0, 100.0, 0.0, 2.0, 0.1, false));
        let est = pairwise_offset(&a, &b, 10).unwrap();
        assert_relative_eq!(est.offset, 0.1, epsilon = 1e-9);
    }

    #[test]
    fn shifted_clock_is_recovered_within_quantization_floor() {
        // 0.01 s stamp quantization leaves at most ~a quantization step of
        // bias in the estimate.
        let mut a = BTreeMap::new();
        let mut b = BTreeMap::new();
        for id in 0..4u64 {
            let x0 = -30.0 * id as f64;
            a.insert(id, tracklet(x0, 100.0, 0.0, 2.0, 0.0, true));
            b.insert(id, tracklet(x0, 100.0, 0.0, 2.0, 0.1, true));
        }
        let est = pairwise_offset(&a, &b, 10).unwrap();
        assert!(
            (est.offset - 0.1).abs() <= 0.012,
            "estimate {} too far from 0.1",
            est.offset
        );
    }

    #[test]
    fn disjoint_x_ranges_share_nothing() {
        let mut a = BTreeMap::new();
        let mut b = BTreeMap::new();
        a.insert(1u64, tracklet(0.0, 100.0, 0.0, 1.0, 0.0, false)); // x ∈ [0, 100]
        b.insert(1u64, tracklet(500.0, 100.0, 0.0, 1.0, 0.0, false)); // x ∈ [500, 600]
        assert_eq!(
            pairwise_offset(&a, &b, 10),
            Err(TimesyncError::NoSharedObjects)
        );
    }

    #[test]
    fn reversing_object_is_excluded() {
        // Object 1 reverses inside the shared range; object 2 is clean, so
        // the estimate comes from object 2 alone and 1 is reported.
        let reversing: Vec<_> = [(0.0, 0.0), (0.1, 10.0), (0.2, 5.0), (0.3, 20.0)]
            .iter()
            .map(|&(t, x)| obs(t, x))
            .collect();
        let mut a = BTreeMap::new();
        let mut b = BTreeMap::new();
        a.insert(1u64, reversing.clone());
        b.insert(1u64, reversing);
        a.insert(2u64, tracklet(0.0, 100.0, 0.0, 1.0, 0.0, false));
        b.insert(2u64, tracklet(0.0, 100.0, 0.0, 1.0, 0.05, false));
        let est = pairwise_offset(&a, &b, 10).unwrap();
        assert_eq!(est.excluded_non_monotone, vec![1]);
        assert_eq!(est.used_objects, 1);
        assert_relative_eq!(est.offset, 0.05, epsilon = 1e-9);
    }

    #[test]
    fn westbound_decreasing_x_is_monotone() {
        let mut a = BTreeMap::new();
        let mut b = BTreeMap::new();
        a.insert(7u64, tracklet(300.0, -90.0, 0.0, 2.0, 0.0, false));
        b.insert(7u64, tracklet(300.0, -90.0, 0.0, 2.0, -0.04, false));
        let est = pairwise_offset(&a, &b, 10).unwrap();
        assert_relative_eq!(est.offset, -0.04, epsilon = 1e-9);
    }

    #[test]
    fn chain_prefix_sums_the_offsets() {
        let pairs = vec![
            ("c1".to_string(), "c0".to_string(), 0.1),
            ("c2".to_string(), "c1".to_string(), -0.05),
        ];
        let offsets = chain_offsets(&pairs).unwrap();
        assert_eq!(offsets.len(), 3);
        assert_relative_eq!(offsets["c0"], 0.0);
        assert_relative_eq!(offsets["c1"], 0.1);
        assert_relative_eq!(offsets["c2"], 0.05, epsilon = 1e-12);
    }

    #[test]
    fn empty_chain_is_empty() {
        assert_eq!(chain_offsets(&[]).unwrap(), BTreeMap::new());
    }

    #[test]
    fn broken_chain_is_rejected() {
        // Two disjoint pieces: two roots.
        let pairs = vec![
            ("c1".to_string(), "c0".to_string(), 0.1),
            ("c3".to_string(), "c2".to_string(), 0.2),
        ];
        assert_eq!(chain_offsets(&pairs), Err(TimesyncError::DisconnectedChain));
    }

    #[test]
    fn seventeen_camera_chain_recovers_injected_offsets() {
        // Cameras k = 0..17 watch x ∈ [120k, 120k + 220] (100 ft overlap);
        // vehicles cross all of them at constant speed. Injected offsets are
        // uniform(−0.3, 0.3) and stamps are floor-quantized to 0.01 s; every
        // chained estimate must land within 0.02 s (2× the quantization).
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n_cams = 17usize;
        let offsets: Vec<f64> = (0..n_cams).map(|_| rng.gen_range(-0.3..0.3)).collect();

        // Per-camera tracklets of 6 vehicles spanning the corridor.
        let mut per_cam: Vec<BTreeMap<u64, Vec<WeightedObservation>>> =
            vec![BTreeMap::new(); n_cams];
        for id in 0..6u64 {
            let v = 90.0 + 5.0 * id as f64;
            let t_start = 0.7 * id as f64;
            for (k, cam_obs) in per_cam.iter_mut().enumerate() {
                let lo = 120.0 * k as f64;
                let hi = lo + 220.0;
                // True crossing window of this camera.
                let t0 = t_start + lo / v;
                let t1 = t_start + hi / v;
                let full = tracklet(-v * t_start, v, t0 - 0.05, t1 + 0.05, offsets[k], true);
                let seen: Vec<_> = full.into_iter().filter(|o| {
                    let x_true = o.x;
                    x_true >= lo && x_true <= hi
                }).collect();
                if seen.len() >= 2 {
                    cam_obs.insert(id, seen);
                }
            }
        }

        let mut pairs = Vec::new();
        for k in 1..n_cams {
            let est = pairwise_offset(&per_cam[k - 1], &per_cam[k], 10).unwrap();
            pairs.push((format!("c{k:02}"), format!("c{:02}", k - 1), est.offset));
        }
        let chained = chain_offsets(&pairs).unwrap();
        for k in 0..n_cams {
            let expect = offsets[k] - offsets[0];
            let got = chained[&format!("c{k:02}")];
            assert!(
                (got - expect).abs() <= 0.02,
                "camera {k}: estimated {got:.4}, injected {expect:.4}"
            );
        }
    }

    /// Splines for objects moving at constant velocity, fitted over [0, 2] s
    /// at 30 fps.
    fn linear_splines(motions: &[(u64, f64, f64)]) -> BTreeMap<u64, TrajectorySpline> {
        motions
            .iter()
            .map(|&(id, x0, v)| {
                let obs: Vec<_> = (0..61)
                    .map(|k| {
                        let t = k as f64 / 30.0;
                        obs(t, x0 + v * t)
                    })
                    .collect();
                (id, fit_spline(&obs).unwrap())
            })
            .collect()
    }

    #[test]
    fn residuals_vanish_for_on_spline_observations() {
        let splines = linear_splines(&[(1, 0.0, 95.0), (2, 40.0, 105.0)]);
        let t = 1.0;
        let mut frame_obs = BTreeMap::new();
        frame_obs.insert(
            ("p1c1".to_string(), 30u32),
            vec![(1u64, obs(t, 95.0)), (2u64, obs(t, 40.0 + 105.0))],
        );
        let eps = estimate_residuals(&splines, &frame_obs);
        assert!(eps[&("p1c1".to_string(), 30)].abs() < 1e-4);
    }

    #[test]
    fn capture_time_shift_is_recovered() {
        // The frame was really captured at t + 0.02 but stamped t: the
        // observed positions sit 0.02 s ahead along each spline.
        let motions = [(1u64, 0.0, 95.0), (2u64, 40.0, 105.0), (3u64, -25.0, 88.0)];
        let splines = linear_splines(&motions);
        let t = 1.0;
        let shift = 0.02;
        let frame: Vec<_> = motions
            .iter()
            .map(|&(id, x0, v)| (id, obs(t, x0 + v * (t + shift))))
            .collect();
        let mut frame_obs = BTreeMap::new();
        frame_obs.insert(("p1c1".to_string(), 30u32), frame);
        let eps = estimate_residuals(&splines, &frame_obs);
        let got = eps[&("p1c1".to_string(), 30)];
        assert!((got - shift).abs() <= 0.005, "residual {got} vs {shift}");
    }

    #[test]
    fn residual_is_clamped_at_the_bound() {
        // A +0.08 s shift exceeds the representable correction; the clamp
        // stops at 1/30 + 0.01 = 0.04333… s.
        let motions = [(1u64, 0.0, 95.0), (2u64, 40.0, 105.0)];
        let splines = linear_splines(&motions);
        let t = 1.0;
        let frame: Vec<_> = motions
            .iter()
            .map(|&(id, x0, v)| (id, obs(t, x0 + v * (t + 0.08))))
            .collect();
        let mut frame_obs = BTreeMap::new();
        frame_obs.insert(("p1c1".to_string(), 30u32), frame);
        let eps = estimate_residuals(&splines, &frame_obs);
        let got = eps[&("p1c1".to_string(), 30)];
        assert!((got - RESIDUAL_BOUND).abs() <= 1e-3, "residual {got}");
        assert!(got <= RESIDUAL_BOUND);
    }

    #[test]
    fn frames_without_spline_coverage_default_to_zero() {
        let splines = BTreeMap::new();
        let mut frame_obs = BTreeMap::new();
        frame_obs.insert(("p1c1".to_string(), 0u32), vec![(9u64, obs(0.0, 0.0))]);
        let eps = estimate_residuals(&splines, &frame_obs);
        assert_eq!(eps[&("p1c1".to_string(), 0)], 0.0);
    }

    #[test]
    fn shift_moves_capped_and_full_distances() {
        // Spline is the constant x = 50; weight 2 px/ft throughout.
        let base: Vec<_> = (0..6)
            .map(|k| WeightedObservation {
                weight: 2.0,
                ..obs(k as f64 * 0.2, 50.0)
            })
            .collect();
        let mut splines = BTreeMap::new();
        splines.insert(1u64, fit_spline(&base).unwrap());

        let make = |x: f64| {
            (1u64, WeightedObservation { weight: 2.0, ..obs(0.5, x) })
        };
        // On the spline → untouched; 10 px (5 ft) off with a 2 px cap →
        // moved exactly 1 ft; 0.5 px (0.25 ft) off with a 3 px cap → moved
        // fully onto the spline.
        let on_spline = make(50.0);
        let far = make(45.0);
        let near = make(50.25);

        let shifted = shift_annotations(&[on_spline, far, near], &splines, 2.0);
        assert_relative_eq!(shifted.observations[0].1.x, 50.0, epsilon = 1e-9);
        assert_relative_eq!(shifted.observations[1].1.x, 46.0, epsilon = 1e-9);
        assert_relative_eq!(shifted.shifts_px[1].0, 2.0, epsilon = 1e-9);

        let shifted3 = shift_annotations(&[make(50.25)], &splines, 3.0);
        assert_relative_eq!(shifted3.observations[0].1.x, 50.0, epsilon = 1e-9);
        assert_relative_eq!(shifted3.shifts_px[0].0, -0.5, epsilon = 1e-9);
        // The tail observation `near` under the 2 px cap also lands exactly
        // on the spline (0.5 px < 2 px).
        assert_relative_eq!(shifted.observations[2].1.x, 50.0, epsilon = 1e-9);
    }

    #[test]
    fn shift_never_exceeds_the_pixel_cap() {
        let base: Vec<_> = (0..8)
            .map(|k| {
                let t = k as f64 * 0.25;
                WeightedObservation { weight: 1.5, ..obs(t, 10.0 * t) }
            })
            .collect();
        let mut splines = BTreeMap::new();
        splines.insert(1u64, fit_spline(&base).unwrap());
        let noisy: Vec<_> = base
            .iter()
            .enumerate()
            .map(|(k, o)| {
                let mut o = o.clone();
                o.x += if k % 2 == 0 { 4.0 } else { -0.3 };
                o.y -= 2.0;
                (1u64, o)
            })
            .collect();
        for max_px in [1.0, 2.0, 3.0] {
            let out = shift_annotations(&noisy, &splines, max_px);
            for (sx, sy) in out.shifts_px {
                assert!(sx.abs() <= max_px + 1e-9);
                assert!(sy.abs() <= max_px + 1e-9);
            }
        }
    }
}
