//! Offline trajectory fusion: stitching per-camera tracklet fragments into
//! corridor-length trajectories.
//!
//! Fragments are linked pairwise — B may follow A when it starts inside a
//! time window around A's end and A's constant-velocity extrapolation lands
//! near B's start with similar dimensions — then chains of links are merged
//! and refit with a trajectory spline.

use std::collections::BTreeSet;

use crate::timesync::{fit_spline, TrajectorySpline, WeightedObservation};
use crate::types::Box3D;

use super::hungarian::solve_assignment;
use super::Tracklet;

/// Cost marking a pair that must never link.
const FORBIDDEN: f64 = 1e6;

/// Stitching thresholds and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct StitchParams {
    /// Maximum time (s) a successor may *start before* its predecessor ends.
    pub t_overlap: f64,
    /// Maximum gap (s) between predecessor end and successor start.
    pub t_gap_max: f64,
    /// Cost per foot of (length + width + height) mismatch.
    pub lambda_dim: f64,
    /// Links costing this much or more (ft) are not candidates; doubles as
    /// the unmatched cost in the assignment, so any candidate link beats
    /// leaving both fragments unlinked.
    pub max_link_cost: f64,
}

impl Default for StitchParams {
    fn default() -> Self {
        StitchParams {
            t_overlap: 0.5,
            t_gap_max: 10.0,
            lambda_dim: 0.5,
            max_link_cost: 15.0,
        }
    }
}

/// A stitched, refit vehicle path: every sample of every merged fragment,
/// time-ordered, under the earliest fragment's identity.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Id of the chain's first fragment.
    pub id: u64,
    /// All member samples sorted by time (non-decreasing: overlapping
    /// fragments may contribute equal timestamps).
    pub samples: Vec<(f64, Box3D)>,
    /// Union of the fragments' source cameras.
    pub source_cameras: BTreeSet<String>,
    /// Smoothed refit of the merged samples; `None` when the merge is too
    /// short to support a cubic fit.
    pub spline: Option<TrajectorySpline>,
}

/// Cost of linking `b` after `a`: Euclidean distance between A's
/// constant-velocity extrapolation (from its last two samples) at B's start
/// time and B's first position, plus `lambda_dim` per foot of dimension
/// mismatch. `None` when the pair is not a candidate at all.
fn link_cost(a: &Tracklet, b: &Tracklet, params: &StitchParams) -> Option<f64> {
    let (t_a, box_a) = a.samples.last()?;
    let (t_b, box_b) = b.samples.first()?;
    if box_a.direction != box_b.direction {
        return None;
    }
    let gap = t_b - t_a;
    if gap < -params.t_overlap || gap > params.t_gap_max {
        return None;
    }

    let (vx, vy) = tail_velocity(a);
    let px = box_a.x + vx * gap;
    let py = box_a.y + vy * gap;
    let dist = ((px - box_b.x).powi(2) + (py - box_b.y).powi(2)).sqrt();
    let dim = (box_a.length - box_b.length).abs()
        + (box_a.width - box_b.width).abs()
        + (box_a.height - box_b.height).abs();
    let cost = dist + params.lambda_dim * dim;
    (cost < params.max_link_cost).then_some(cost)
}

/// Velocity (ft/s) from a tracklet's last two samples; zero for a single
/// sample or a degenerate time step.
fn tail_velocity(a: &Tracklet) -> (f64, f64) {
    let n = a.samples.len();
    if n < 2 {
        return (0.0, 0.0);
    }
    let (t1, b1) = &a.samples[n - 2];
    let (t2, b2) = &a.samples[n - 1];
    let dt = t2 - t1;
    if dt <= 0.0 {
        return (0.0, 0.0);
    }
    ((b2.x - b1.x) / dt, (b2.y - b1.y) / dt)
}

/// Merges tracklet fragments into trajectories.
///
/// Links are chosen by a minimum-cost one-to-one matching over all candidate
/// predecessor→successor pairs (each fragment takes at most one successor
/// and one predecessor), so chains form; chains are merged time-sorted and
/// refit. Mutually overlapping short fragments can make the matching cyclic
/// — A before B *and* B before A both inside the overlap window — so cycles
/// are broken at their costliest link before merging. Every input sample
/// appears in exactly one output trajectory; outputs are ordered by start
/// time.
pub fn stitch_tracklets(tracklets: &[Tracklet], params: &StitchParams) -> Vec<Trajectory> {
    let n = tracklets.len();
    if n == 0 {
        return Vec::new();
    }

    // Padded square assignment: rows are predecessors, columns successors;
    // each fragment's "no link" dummy costs max_link_cost.
    let size = 2 * n;
    let mut cost = vec![vec![FORBIDDEN; size]; size];
    for (i, a) in tracklets.iter().enumerate() {
        for (j, b) in tracklets.iter().enumerate() {
            if i == j {
                continue;
            }
            if let Some(c) = link_cost(a, b, params) {
                cost[i][j] = c;
            }
        }
        cost[i][n + i] = params.max_link_cost;
    }
    for j in 0..n {
        cost[n + j][j] = params.max_link_cost;
        for i in 0..n {
            cost[n + j][n + i] = 0.0;
        }
    }
    let assign = solve_assignment(&cost);

    let mut succ: Vec<Option<usize>> = vec![None; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let j = assign[i];
        if j < n && cost[i][j] < FORBIDDEN {
            succ[i] = Some(j);
            pred[j] = Some(i);
        }
    }

    // Break cycles (every node not reachable from a predecessor-less root
    // lies on one): drop each cycle's costliest link.
    let mut visited = vec![false; n];
    for (root, root_pred) in pred.iter().enumerate() {
        if root_pred.is_none() {
            let mut at = Some(root);
            while let Some(i) = at {
                visited[i] = true;
                at = succ[i];
            }
        }
    }
    for start in 0..n {
        if visited[start] {
            continue;
        }
        let mut worst = (f64::NEG_INFINITY, start);
        let mut i = start;
        loop {
            let j = succ[i].expect("cycle nodes all have successors");
            let c = cost[i][j];
            if (c, i) > worst {
                worst = (c, i);
            }
            visited[i] = true;
            i = j;
            if i == start {
                break;
            }
        }
        let cut = worst.1;
        let next = succ[cut].expect("cut link exists");
        succ[cut] = None;
        pred[next] = None;
    }

    // Walk chains from the (possibly new) roots and merge.
    let mut out: Vec<Trajectory> = Vec::new();
    for root in 0..n {
        if pred[root].is_some() {
            continue;
        }
        let mut samples: Vec<(f64, Box3D)> = Vec::new();
        let mut source_cameras = BTreeSet::new();
        let mut at = Some(root);
        while let Some(i) = at {
            samples.extend(tracklets[i].samples.iter().cloned());
            source_cameras.extend(tracklets[i].source_cameras.iter().cloned());
            at = succ[i];
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let obs: Vec<WeightedObservation> = samples
            .iter()
            .map(|(t, b)| WeightedObservation {
                t: *t,
                x: b.x,
                y: b.y,
                weight: 1.0,
                camera: String::new(),
                frame_index: 0,
            })
            .collect();
        let spline = fit_spline(&obs).ok();
        out.push(Trajectory {
            id: tracklets[root].id,
            samples,
            source_cameras,
            spline,
        });
    }
    out.sort_by(|a, b| {
        let ta = a.samples.first().map_or(f64::INFINITY, |s| s.0);
        let tb = b.samples.first().map_or(f64::INFINITY, |s| s.0);
        ta.total_cmp(&tb).then_with(|| a.id.cmp(&b.id))
    });
    out
}
