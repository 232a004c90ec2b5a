//! Online multi-camera 3D vehicle tracking in roadway coordinates.
//!
//! Detections arrive as per-camera timestamped frames already expressed in
//! roadway feet. A global 15 Hz clock drives the tracker: at each step every
//! camera contributes its nearest unconsumed frame within 1/60 s (frames
//! outside that window are skipped, holding the nominal rate), detections
//! are optionally fused across cameras, and constant-velocity Kalman tracks
//! are matched to detections by footprint IOU — one-stage (KIOU) or
//! two-stage by confidence (Byte). Eastbound and westbound traffic are
//! tracked as fully separate spaces. The online stage produces per-scene
//! tracklets; offline trajectory fusion ([`stitch_tracklets`]) merges
//! fragments of the same vehicle across cameras and gaps.

mod associate;
pub(crate) mod hungarian;
mod kalman;
mod stitch;

pub use associate::{
    associate_byte, associate_kiou, fuse_detections, iou_bev, Association, ByteAssociation,
};
pub use kalman::{kalman_predict, kalman_update, KalmanConfig, TrackState};
pub use stitch::{stitch_tracklets, StitchParams, Trajectory};

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::types::{Box3D, Direction};

/// Global tracking step rate (Hz): the paper's nominal processing rate.
pub const TICK_RATE: f64 = 15.0;

/// Half-width (s) of the window in which a camera frame counts as
/// synchronized with a tick.
pub const SYNC_WINDOW: f64 = 1.0 / 60.0;

#[derive(Debug, Error, PartialEq)]
pub enum TrackingError {
    /// A measurement from the opposite travel direction was offered to a
    /// track; directions are separate spaces and never mix.
    #[error("detection direction does not match track direction")]
    DirectionMismatch,
    /// No camera supplied a single frame.
    #[error("no detection frames in any camera stream")]
    EmptyScene,
}

/// One detected vehicle box with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub box3d: Box3D,
    /// Detector confidence in [0, 1].
    pub confidence: f64,
    pub camera: String,
    /// Corrected timestamp (s) of the frame the detection came from.
    pub t: f64,
}

/// All detections of one camera frame, stamped with its corrected time.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionFrame {
    pub t: f64,
    /// (box, confidence) pairs.
    pub detections: Vec<(Box3D, f64)>,
}

/// Association strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackerKind {
    /// One-stage IOU association over detections above the confidence floor.
    Kiou,
    /// Two-stage association: high-confidence first, leftovers rescued by
    /// the low band.
    Byte,
}

/// Which cross-camera fusion stages run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    None,
    /// Detection fusion: online NMS across cameras before association.
    Df,
    /// Trajectory fusion: offline tracklet stitching after tracking.
    Tf,
    DfTf,
}

impl FusionMode {
    pub fn uses_df(self) -> bool {
        matches!(self, FusionMode::Df | FusionMode::DfTf)
    }

    pub fn uses_tf(self) -> bool {
        matches!(self, FusionMode::Tf | FusionMode::DfTf)
    }
}

/// Tracker configuration; defaults follow the evaluation protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub tracker: TrackerKind,
    pub fusion: FusionMode,
    /// Footprint-IOU floor for any track–detection match.
    pub min_iou: f64,
    /// Confidence bound of the primary band (exclusive): Byte's stage-1
    /// detections and KIOU's only detections lie strictly above it.
    pub byte_high: f64,
    /// Low edge (inclusive) of Byte's rescue band; below it detections are
    /// discarded.
    pub byte_low: f64,
    /// Footprint-IOU threshold for cross-camera detection fusion.
    pub df_iou: f64,
    /// Consecutive hits before a track is confirmed (and emitted).
    pub n_init: u32,
    /// Consecutive misses before a confirmed track is terminated.
    pub n_miss: u32,
    pub kalman: KalmanConfig,
    pub stitch: StitchParams,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            tracker: TrackerKind::Kiou,
            fusion: FusionMode::None,
            min_iou: 0.3,
            byte_high: 0.3,
            byte_low: 0.01,
            df_iou: 0.01,
            n_init: 3,
            n_miss: 8,
            kalman: KalmanConfig::default(),
            stitch: StitchParams::default(),
        }
    }
}

/// One vehicle's track through the scene: samples carry the matched
/// detections' positions (not the filtered means) with the track's fixed
/// dimensions and final voted class.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    /// 1-based id in order of first appearance.
    pub id: u64,
    /// (corrected time, box) per matched detection, strictly ordered by the
    /// 15 Hz steps that produced them.
    pub samples: Vec<(f64, Box3D)>,
    /// Cameras whose detections were matched into this track.
    pub source_cameras: BTreeSet<String>,
}

/// A live track plus its lifecycle bookkeeping.
struct LiveTrack {
    state: TrackState,
    born_tick: usize,
    confirmed: bool,
    samples: Vec<(f64, Box3D)>,
    cameras: BTreeSet<String>,
}

impl LiveTrack {
    fn finalize(self) -> Tracklet {
        let class = self.state.voted_class();
        let mut samples = self.samples;
        for (_, b) in &mut samples {
            b.class = class;
        }
        Tracklet {
            id: self.state.id,
            samples,
            source_cameras: self.cameras,
        }
    }
}

/// Runs the online tracker over per-camera detection streams.
///
/// The clock starts at the earliest frame of any camera and ticks at 15 Hz;
/// per tick, each camera's nearest unconsumed frame within 1/60 s is
/// consumed (older frames are skipped for good). Tentative tracks must hit
/// on every tick until `n_init` — a single miss discards them along with
/// their buffered samples — after which they are confirmed and survive up to
/// `n_miss` consecutive misses. Tracklet ids are assigned 1, 2, … in order
/// of first sample time after the scene completes.
pub fn track_scene(
    streams: &BTreeMap<String, Vec<DetectionFrame>>,
    config: &TrackerConfig,
) -> Result<Vec<Tracklet>, TrackingError> {
    let tick = 1.0 / TICK_RATE;

    // Per-camera frame queues sorted by time, with a consume cursor.
    let mut queues: Vec<(&str, Vec<&DetectionFrame>, usize)> = streams
        .iter()
        .map(|(cam, frames)| {
            let mut sorted: Vec<&DetectionFrame> = frames.iter().collect();
            sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
            (cam.as_str(), sorted, 0usize)
        })
        .collect();

    let t0 = queues
        .iter()
        .filter_map(|(_, frames, _)| frames.first().map(|f| f.t))
        .fold(f64::INFINITY, f64::min);
    let t_end = queues
        .iter()
        .filter_map(|(_, frames, _)| frames.last().map(|f| f.t))
        .fold(f64::NEG_INFINITY, f64::max);
    if !t_end.is_finite() {
        return Err(TrackingError::EmptyScene);
    }
    let n_ticks = ((t_end + SYNC_WINDOW - t0) / tick).floor() as usize + 1;

    let mut live: Vec<LiveTrack> = Vec::new();
    let mut finished: Vec<LiveTrack> = Vec::new();
    let mut next_id: u64 = 1;

    for k in 0..n_ticks {
        let t_k = t0 + k as f64 * tick;

        // Advance every track that existed before this tick.
        for tr in &mut live {
            if tr.born_tick < k {
                tr.state = kalman_predict(&tr.state, &config.kalman, tick);
                tr.state.age += 1;
            }
        }

        // Gather this tick's detections camera by camera.
        let mut dets: Vec<Detection> = Vec::new();
        for (cam, frames, cursor) in &mut queues {
            while *cursor < frames.len() && frames[*cursor].t < t_k - SYNC_WINDOW {
                *cursor += 1; // too old for any future tick: skipped
            }
            let mut best: Option<usize> = None;
            let mut j = *cursor;
            while j < frames.len() && frames[j].t <= t_k + SYNC_WINDOW {
                if best.is_none_or(|b| (frames[j].t - t_k).abs() < (frames[b].t - t_k).abs()) {
                    best = Some(j);
                }
                j += 1;
            }
            if let Some(b) = best {
                dets.extend(frames[b].detections.iter().map(|(box3d, conf)| Detection {
                    box3d: *box3d,
                    confidence: *conf,
                    camera: cam.to_string(),
                    t: frames[b].t,
                }));
                *cursor = b + 1;
            }
        }

        let dets = if config.fusion.uses_df() {
            fuse_detections(&dets, config.df_iou)
        } else {
            dets
        };

        // Associate per direction; removals and spawns are deferred so
        // indices into `live` stay stable within the tick.
        let mut dead: Vec<usize> = Vec::new();
        let mut spawned: Vec<LiveTrack> = Vec::new();
        for dir in [Direction::Eb, Direction::Wb] {
            let track_idx: Vec<usize> = (0..live.len())
                .filter(|&i| live[i].state.direction == dir)
                .collect();
            let det_idx: Vec<usize> = (0..dets.len())
                .filter(|&j| dets[j].box3d.direction == dir)
                .collect();
            let track_boxes: Vec<Box3D> = track_idx.iter().map(|&i| live[i].state.to_box()).collect();

            // (track, detection) matches, tracks that missed, detections
            // allowed to seed new tracks — all as indices into live/dets.
            let (matches, missed, seeds): (Vec<(usize, usize)>, Vec<usize>, Vec<usize>) =
                match config.tracker {
                    TrackerKind::Kiou => {
                        let usable: Vec<usize> = det_idx
                            .iter()
                            .copied()
                            .filter(|&j| dets[j].confidence > config.byte_high)
                            .collect();
                        let boxes: Vec<Box3D> = usable.iter().map(|&j| dets[j].box3d).collect();
                        let a = associate_kiou(&track_boxes, &boxes, config.min_iou);
                        (
                            a.matches
                                .iter()
                                .map(|&(i, j)| (track_idx[i], usable[j]))
                                .collect(),
                            a.unmatched_tracks.iter().map(|&i| track_idx[i]).collect(),
                            a.unmatched_detections.iter().map(|&j| usable[j]).collect(),
                        )
                    }
                    TrackerKind::Byte => {
                        let pairs: Vec<(Box3D, f64)> = det_idx
                            .iter()
                            .map(|&j| (dets[j].box3d, dets[j].confidence))
                            .collect();
                        let a = associate_byte(
                            &track_boxes,
                            &pairs,
                            config.min_iou,
                            config.byte_high,
                            config.byte_low,
                        );
                        (
                            a.matches
                                .iter()
                                .map(|&(i, j)| (track_idx[i], det_idx[j]))
                                .collect(),
                            a.unmatched_tracks.iter().map(|&i| track_idx[i]).collect(),
                            a.new_track_detections
                                .iter()
                                .map(|&j| det_idx[j])
                                .collect(),
                        )
                    }
                };

            for (i, j) in matches {
                let det = &dets[j];
                let tr = &mut live[i];
                tr.state = kalman_update(&tr.state, &config.kalman, det)?;
                tr.state.hits += 1;
                tr.state.misses = 0;
                tr.state.vote_class(det.box3d.class, k as u32);
                tr.samples.push((det.t, sample_box(&tr.state, det)));
                tr.cameras.insert(det.camera.clone());
                if !tr.confirmed && tr.state.hits >= config.n_init {
                    tr.confirmed = true;
                }
            }
            for i in missed {
                let tr = &mut live[i];
                tr.state.misses += 1;
                if !tr.confirmed || tr.state.misses >= config.n_miss {
                    dead.push(i);
                }
            }
            for j in seeds {
                let det = &dets[j];
                let state = TrackState::from_detection(next_id, det);
                next_id += 1;
                let sample = (det.t, sample_box(&state, det));
                spawned.push(LiveTrack {
                    confirmed: config.n_init <= 1,
                    born_tick: k,
                    samples: vec![sample],
                    cameras: BTreeSet::from([det.camera.clone()]),
                    state,
                });
            }
        }

        dead.sort_unstable();
        for i in dead.into_iter().rev() {
            let tr = live.swap_remove(i);
            if tr.confirmed {
                finished.push(tr);
            }
        }
        live.append(&mut spawned);
    }

    finished.extend(live.into_iter().filter(|tr| tr.confirmed));

    // Renumber by first appearance.
    let mut tracklets: Vec<Tracklet> = finished.into_iter().map(LiveTrack::finalize).collect();
    tracklets.sort_by(|a, b| {
        let ta = a.samples.first().map_or(f64::INFINITY, |s| s.0);
        let tb = b.samples.first().map_or(f64::INFINITY, |s| s.0);
        ta.total_cmp(&tb).then_with(|| a.id.cmp(&b.id))
    });
    for (n, tr) in tracklets.iter_mut().enumerate() {
        tr.id = n as u64 + 1;
    }
    Ok(tracklets)
}

/// The sample recorded for a matched detection: the detection's position
/// with the track's fixed dimensions. The class is provisional until the
/// track finalizes its vote.
fn sample_box(state: &TrackState, det: &Detection) -> Box3D {
    Box3D {
        x: det.box3d.x,
        y: det.box3d.y,
        length: state.dims.0,
        width: state.dims.1,
        height: state.dims.2,
        direction: state.direction,
        class: det.box3d.class,
    }
}
