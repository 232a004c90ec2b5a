//! Higher-order tracking accuracy.
//!
//! HOTA decomposes tracking quality into detection (are the boxes found?)
//! and association (do found boxes keep one identity?) and geometric-means
//! the two, integrating over a sweep of localization thresholds so neither
//! loose nor tight overlap dominates.
//!
//! Matching differs from CLEAR-MOT on purpose: there is no frame-to-frame
//! identity memory. Each frame is matched independently, but guided by
//! global track affinity — pairs that overlap often across the whole scene
//! are preferred — so the per-frame matchings stay mutually consistent.
//! At each threshold the matcher first maximizes the number of matched
//! pairs (detection score) and only then the global-affinity-weighted
//! overlap, never matching a pair below the threshold.

use std::collections::BTreeMap;

use crate::tracking::{hungarian::solve_assignment, iou_bev};

use super::AlignedFrame;

/// Scores at one localization threshold. Fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HotaAtThreshold {
    pub alpha: f64,
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub true_positives: u64,
    pub false_negatives: u64,
    pub false_positives: u64,
}

/// Threshold sweep plus the integrated scores (percentages).
#[derive(Debug, Clone)]
pub struct HotaSummary {
    pub per_threshold: Vec<HotaAtThreshold>,
    /// Mean over thresholds, as a percentage.
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
}

/// One frame's presence and overlap: (gt indices, pred indices,
/// sim[gt][pred]).
type FrameSim = (Vec<usize>, Vec<usize>, Vec<Vec<f64>>);

/// Per-frame presence and pairwise overlap, with ids mapped onto dense
/// indices once up front.
struct SimTable {
    n_gt: usize,
    n_pred: usize,
    frames: Vec<FrameSim>,
    /// Frames each ground-truth / predicted track is present in.
    gt_count: Vec<u64>,
    pred_count: Vec<u64>,
}

fn build_sim_table(frames: &[AlignedFrame]) -> SimTable {
    let mut gt_index: BTreeMap<u64, usize> = BTreeMap::new();
    let mut pred_index: BTreeMap<u64, usize> = BTreeMap::new();
    for f in frames {
        for &(id, _) in &f.gt {
            let next = gt_index.len();
            gt_index.entry(id).or_insert(next);
        }
        for &(id, _) in &f.pred {
            let next = pred_index.len();
            pred_index.entry(id).or_insert(next);
        }
    }
    let (n_gt, n_pred) = (gt_index.len(), pred_index.len());
    let mut gt_count = vec![0u64; n_gt];
    let mut pred_count = vec![0u64; n_pred];
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        let gs: Vec<usize> = f.gt.iter().map(|&(id, _)| gt_index[&id]).collect();
        let ps: Vec<usize> = f.pred.iter().map(|&(id, _)| pred_index[&id]).collect();
        for &g in &gs {
            gt_count[g] += 1;
        }
        for &p in &ps {
            pred_count[p] += 1;
        }
        let sim: Vec<Vec<f64>> = f
            .gt
            .iter()
            .map(|(_, gb)| f.pred.iter().map(|(_, pb)| iou_bev(gb, pb)).collect())
            .collect();
        out.push((gs, ps, sim));
    }
    SimTable {
        n_gt,
        n_pred,
        frames: out,
        gt_count,
        pred_count,
    }
}

/// Global track affinity: for each (ground truth, prediction) pair, the
/// Jaccard index of their co-occurring overlap mass. Per frame each pair's
/// similarity is first normalized against all competing pairs so that a
/// prediction straddling many objects doesn't look globally faithful to
/// each of them.
fn global_alignment(table: &SimTable) -> Vec<Vec<f64>> {
    let mut potential = vec![vec![0.0f64; table.n_pred]; table.n_gt];
    for (gs, ps, sim) in &table.frames {
        let row_sum: Vec<f64> = sim.iter().map(|r| r.iter().sum()).collect();
        let mut col_sum = vec![0.0f64; ps.len()];
        for row in sim {
            for (j, v) in row.iter().enumerate() {
                col_sum[j] += v;
            }
        }
        for (i, &g) in gs.iter().enumerate() {
            for (j, &p) in ps.iter().enumerate() {
                let s = sim[i][j];
                let denom = row_sum[i] + col_sum[j] - s;
                if denom > 0.0 {
                    potential[g][p] += s / denom;
                }
            }
        }
    }
    for (g, row) in potential.iter_mut().enumerate() {
        for (p, v) in row.iter_mut().enumerate() {
            let denom = table.gt_count[g] as f64 + table.pred_count[p] as f64 - *v;
            *v = if denom > 0.0 { *v / denom } else { 0.0 };
        }
    }
    potential
}

const FORBIDDEN: f64 = 1e6;

/// Matches one frame at threshold `alpha`: maximum cardinality over pairs
/// with `sim ≥ alpha`, ties broken toward the highest affinity-weighted
/// similarity. Returns local (gt, pred) index pairs.
fn match_frame(
    gs: &[usize],
    ps: &[usize],
    sim: &[Vec<f64>],
    alpha: f64,
    affinity: &[Vec<f64>],
) -> Vec<(usize, usize)> {
    let (n, m) = (gs.len(), ps.len());
    if n == 0 || m == 0 {
        return Vec::new();
    }
    // Padded square assignment. A matched pair costs 1 − score ∈ [0, 1]
    // and frees two dummy slots worth `unmatched` each, so with
    // unmatched > (n + m) / 2 every extra feasible match lowers the total
    // cost regardless of scores: cardinality first, then score.
    let unmatched = (n + m) as f64 + 1.0;
    let size = n + m;
    debug_assert!(size < 1000, "frame too crowded for the FORBIDDEN margin");
    let mut cost = vec![vec![FORBIDDEN; size]; size];
    for (i, row) in cost.iter_mut().enumerate().take(n) {
        for (j, slot) in row.iter_mut().enumerate().take(m) {
            if sim[i][j] >= alpha {
                *slot = 1.0 - affinity[gs[i]][ps[j]] * sim[i][j];
            }
        }
        row[m + i] = unmatched;
    }
    for (i, row) in cost.iter_mut().enumerate().skip(n) {
        row[i - n] = unmatched;
        for slot in row.iter_mut().skip(m) {
            *slot = 0.0;
        }
    }
    let assign = solve_assignment(&cost);
    (0..n)
        .filter_map(|i| {
            let j = assign[i];
            (j < m && sim[i][j] >= alpha).then_some((i, j))
        })
        .collect()
}

/// HOTA over the aligned timeline at the given localization thresholds.
pub fn hota(frames: &[AlignedFrame], thresholds: &[f64]) -> HotaSummary {
    let table = build_sim_table(frames);
    let affinity = global_alignment(&table);

    let mut per_threshold = Vec::with_capacity(thresholds.len());
    for &alpha in thresholds {
        let mut tp = 0u64;
        let mut matches = vec![vec![0u64; table.n_pred]; table.n_gt];
        for (gs, ps, sim) in &table.frames {
            for (i, j) in match_frame(gs, ps, sim, alpha, &affinity) {
                matches[gs[i]][ps[j]] += 1;
                tp += 1;
            }
        }
        let gt_total: u64 = table.gt_count.iter().sum();
        let pred_total: u64 = table.pred_count.iter().sum();
        let fn_count = gt_total - tp;
        let fp = pred_total - tp;

        // Association accuracy: mean over matched frames of the Jaccard
        // overlap between the two tracks' lifetimes.
        let mut assoc_sum = 0.0;
        for (g, row) in matches.iter().enumerate() {
            for (p, &mc) in row.iter().enumerate() {
                if mc > 0 {
                    let union = table.gt_count[g] + table.pred_count[p] - mc;
                    assoc_sum += mc as f64 * (mc as f64 / union as f64);
                }
            }
        }
        let assa = if tp == 0 { 0.0 } else { assoc_sum / tp as f64 };
        let det_denom = tp + fn_count + fp;
        let deta = if det_denom == 0 {
            0.0
        } else {
            tp as f64 / det_denom as f64
        };
        per_threshold.push(HotaAtThreshold {
            alpha,
            hota: (deta * assa).sqrt(),
            deta,
            assa,
            true_positives: tp,
            false_negatives: fn_count,
            false_positives: fp,
        });
    }

    let n = per_threshold.len().max(1) as f64;
    let mean = |f: fn(&HotaAtThreshold) -> f64| {
        100.0 * per_threshold.iter().map(f).sum::<f64>() / n
    };
    HotaSummary {
        hota: mean(|h| h.hota),
        deta: mean(|h| h.deta),
        assa: mean(|h| h.assa),
        per_threshold,
    }
}
