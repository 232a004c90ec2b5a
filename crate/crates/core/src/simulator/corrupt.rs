//! Parametric detector noise: the stand-in for a real image-space detector.
//!
//! Corruption happens per camera, downstream of rendering, and mirrors how
//! detection errors actually present: boxes jitter in position and size,
//! vehicles vanish for stretches when something blocks the view (lanes far
//! from the camera side suffer most, and an occlusion can persist for a
//! window of consecutive frames, not single frames), ghosts appear with low
//! confidence, and the detector's own non-maximum suppression removes
//! near-duplicate boxes — first in pixel space through the camera
//! projection, then on roadway footprints.

use super::camera::{CameraConfig, CameraRender, FRAME_HEIGHT, FRAME_WIDTH};
use super::SimError;
use crate::geometry::box_corners;
use crate::tracking::{iou_bev, DetectionFrame};
use crate::types::{Box3D, Direction, VehicleClass};
use crate::util::mix_seed;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use std::collections::BTreeMap;

/// Pixel-IOU threshold of the detector's first NMS stage.
pub const NMS_PIXEL_IOU: f64 = 0.4;
/// Roadway footprint-IOU threshold of the second NMS stage.
pub const NMS_ROAD_IOU: f64 = 0.01;

/// Distance-based occlusion: the per-frame probability that a visible
/// vehicle *starts* an occlusion window grows linearly with its lateral
/// distance from the camera side of the road.
#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionModel {
    /// Start probability for a vehicle at `reference_y`.
    pub p_start_base: f64,
    /// Added start probability per lane-width of distance from
    /// `reference_y`.
    pub p_start_per_lane: f64,
    /// Occlusion windows last 1..=`max_window` frames, drawn uniformly.
    pub max_window: u32,
    /// Lateral position of the camera side of the road (the default camera
    /// bank stands 20 ft beyond the westbound lanes).
    pub reference_y: f64,
    pub lane_width: f64,
}

impl OcclusionModel {
    fn p_start(&self, y: f64) -> f64 {
        let lanes_away = ((y - self.reference_y) / self.lane_width).max(0.0);
        (self.p_start_base + self.p_start_per_lane * lanes_away).clamp(0.0, 1.0)
    }
}

/// A scripted occlusion: `vehicle` is removed from frames
/// `first_frame..=last_frame` of `camera` (all cameras when `None`).
#[derive(Debug, Clone, PartialEq)]
pub struct ForcedOcclusion {
    pub camera: Option<String>,
    pub vehicle: u64,
    pub first_frame: u32,
    pub last_frame: u32,
}

/// Detector noise parameters. All randomness derives from `seed`; each
/// camera corrupts under its own stream (`"noise:{camera id}"`).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub seed: u64,
    /// Gaussian σ on box x and y, feet.
    pub position_sigma: f64,
    /// Gaussian σ on box length/width/height, feet (results clamped to
    /// ≥ 1 ft).
    pub dimension_sigma: f64,
    /// True detections score `1 − U(0, spread)`; zero spread means
    /// confidence exactly 1.
    pub confidence_spread: f64,
    /// False positives score uniformly inside this range; keep it below
    /// `1 − confidence_spread` so true boxes stochastically dominate.
    pub fp_confidence: (f64, f64),
    /// Per-frame probability of injecting one ghost detection.
    pub p_fp: f64,
    /// Lateral band ghosts are drawn from.
    pub fp_lateral_range: (f64, f64),
    /// Uniform per-box miss probability, independent of occlusion.
    pub p_fn: f64,
    pub occlusion: OcclusionModel,
    pub forced_occlusions: Vec<ForcedOcclusion>,
}

impl NoiseConfig {
    /// A completely noise-free config: detections reproduce the truth with
    /// confidence 1. The base for most oracle scenes.
    pub fn none(seed: u64) -> Self {
        NoiseConfig {
            seed,
            position_sigma: 0.0,
            dimension_sigma: 0.0,
            confidence_spread: 0.0,
            fp_confidence: (0.05, 0.5),
            p_fp: 0.0,
            fp_lateral_range: (-48.0, 48.0),
            p_fn: 0.0,
            occlusion: OcclusionModel {
                p_start_base: 0.0,
                p_start_per_lane: 0.0,
                max_window: 1,
                reference_y: -68.0,
                lane_width: 12.0,
            },
            forced_occlusions: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let ok = self.position_sigma >= 0.0
            && self.dimension_sigma >= 0.0
            && (0.0..=1.0).contains(&self.confidence_spread)
            && prob(self.p_fp)
            && prob(self.p_fn)
            && self.fp_confidence.0 <= self.fp_confidence.1
            && prob(self.fp_confidence.0)
            && prob(self.fp_confidence.1)
            && self.fp_lateral_range.0 <= self.fp_lateral_range.1
            && prob(self.occlusion.p_start_base)
            && self.occlusion.p_start_per_lane >= 0.0
            && self.occlusion.max_window >= 1
            && self.occlusion.lane_width > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(
                "noise: sigmas >= 0, probabilities in [0,1], ranges ordered, occlusion window >= 1"
                    .to_string(),
            ))
        }
    }
}

impl Default for NoiseConfig {
    /// Mild realistic noise: half a foot of position jitter, occasional
    /// misses, ghosts, and distance-weighted occlusion windows.
    fn default() -> Self {
        NoiseConfig {
            position_sigma: 0.5,
            dimension_sigma: 0.3,
            confidence_spread: 0.2,
            p_fp: 0.02,
            p_fn: 0.02,
            occlusion: OcclusionModel {
                p_start_base: 0.001,
                p_start_per_lane: 0.0008,
                max_window: 300,
                reference_y: -68.0,
                lane_width: 12.0,
            },
            ..NoiseConfig::none(0)
        }
    }
}

/// Axis-aligned pixel bounding box of the projected 3D box, clipped to the
/// frame. `None` when any corner is behind the camera, unprojectable, or
/// the clipped box is empty — the pixel NMS stage then ignores the pair.
fn pixel_bbox(cam: &CameraConfig, b: &Box3D) -> Option<(f64, f64, f64, f64)> {
    let mut u = (f64::INFINITY, f64::NEG_INFINITY);
    let mut v = (f64::INFINITY, f64::NEG_INFINITY);
    for corner in box_corners(b) {
        if cam.projection.depth(&corner) <= 0.0 {
            return None;
        }
        let px = cam.projection.project(&corner).ok()?;
        u = (u.0.min(px.u), u.1.max(px.u));
        v = (v.0.min(px.v), v.1.max(px.v));
    }
    let clipped = (
        u.0.max(0.0),
        u.1.min(FRAME_WIDTH),
        v.0.max(0.0),
        v.1.min(FRAME_HEIGHT),
    );
    (clipped.1 > clipped.0 && clipped.3 > clipped.2).then_some(clipped)
}

fn pixel_iou(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> f64 {
    let ix = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    let iy = (a.3.min(b.3) - a.2.max(b.2)).max(0.0);
    let inter = ix * iy;
    if inter == 0.0 {
        return 0.0;
    }
    inter / ((a.1 - a.0) * (a.3 - a.2) + (b.1 - b.0) * (b.3 - b.2) - inter)
}

/// Two-stage NMS in confidence order (ties keep earlier input), returning
/// survivors in input order: pixel IOU > 0.4 first, then roadway footprint
/// IOU > 0.01 on the pixel stage's survivors.
fn two_stage_nms(cam: &CameraConfig, dets: &[(Box3D, f64)]) -> Vec<(Box3D, f64)> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].1.total_cmp(&dets[a].1));

    let pixels: Vec<Option<(f64, f64, f64, f64)>> =
        dets.iter().map(|(b, _)| pixel_bbox(cam, b)).collect();
    let mut keep = vec![false; dets.len()];
    for &i in &order {
        let clash = keep.iter().enumerate().any(|(j, &kept)| {
            kept && match (pixels[i], pixels[j]) {
                (Some(a), Some(b)) => pixel_iou(a, b) > NMS_PIXEL_IOU,
                _ => false,
            }
        });
        keep[i] = !clash;
    }

    let mut keep2 = vec![false; dets.len()];
    for &i in &order {
        if !keep[i] {
            continue;
        }
        let clash = keep2
            .iter()
            .enumerate()
            .any(|(j, &kept)| kept && iou_bev(&dets[i].0, &dets[j].0) > NMS_ROAD_IOU);
        keep2[i] = !clash;
    }

    dets.iter()
        .enumerate()
        .filter(|(i, _)| keep2[*i])
        .map(|(_, d)| *d)
        .collect()
}

/// Corrupts one camera's rendered frames into detector output.
///
/// Per frame, in order (stream `"noise:{camera id}"`): each true box in id
/// order rolls for occlusion start (skipped while a window is active or a
/// scripted window covers the frame; a start also draws the window length),
/// then for a uniform miss, and survivors draw two position offsets, three
/// dimension offsets, and a confidence; finally one roll decides whether a
/// ghost appears (drawing its lateral position, longitudinal position,
/// class, and confidence). The detector's two-stage NMS then prunes the
/// frame. Detection timestamps are the camera's *raw* stamps — downstream
/// stages are expected to correct them.
pub fn corrupt_detections(
    render: &CameraRender,
    cam: &CameraConfig,
    noise: &NoiseConfig,
) -> Vec<DetectionFrame> {
    debug_assert!(noise.validate().is_ok());
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(noise.seed, &format!("noise:{}", render.camera)));
    let position = Normal::new(0.0, noise.position_sigma).expect("validated sigma");
    let dimension = Normal::new(0.0, noise.dimension_sigma).expect("validated sigma");

    let forced = |vehicle: u64, frame: u32| {
        noise.forced_occlusions.iter().any(|f| {
            f.vehicle == vehicle
                && f.camera.as_deref().is_none_or(|c| c == render.camera)
                && (f.first_frame..=f.last_frame).contains(&frame)
        })
    };

    // Frames remaining in each vehicle's active occlusion window.
    let mut occluded: BTreeMap<u64, u32> = BTreeMap::new();

    render
        .frames
        .iter()
        .map(|frame| {
            let mut detections: Vec<(Box3D, f64)> = Vec::with_capacity(frame.boxes.len() + 1);
            for (id, b) in &frame.boxes {
                if forced(*id, frame.frame_index) {
                    continue;
                }
                if let Some(left) = occluded.get_mut(id) {
                    *left -= 1;
                    if *left == 0 {
                        occluded.remove(id);
                    }
                    continue;
                }
                if rng.gen::<f64>() < noise.occlusion.p_start(b.y) {
                    let window = rng.gen_range(1..=noise.occlusion.max_window);
                    if window > 1 {
                        occluded.insert(*id, window - 1);
                    }
                    continue;
                }
                if rng.gen::<f64>() < noise.p_fn {
                    continue;
                }
                let noisy = Box3D {
                    x: b.x + position.sample(&mut rng),
                    y: b.y + position.sample(&mut rng),
                    length: (b.length + dimension.sample(&mut rng)).max(1.0),
                    width: (b.width + dimension.sample(&mut rng)).max(1.0),
                    height: (b.height + dimension.sample(&mut rng)).max(1.0),
                    ..*b
                };
                let confidence = 1.0 - rng.gen::<f64>() * noise.confidence_spread;
                detections.push((noisy, confidence));
            }

            if rng.gen::<f64>() < noise.p_fp {
                let (y_lo, y_hi) = noise.fp_lateral_range;
                let y = y_lo + rng.gen::<f64>() * (y_hi - y_lo);
                let x = cam.fov.0 + rng.gen::<f64>() * (cam.fov.1 - cam.fov.0);
                let class = VehicleClass::ALL[rng.gen_range(0..VehicleClass::ALL.len())];
                let (length, width, height) = super::class_dims(class);
                let (c_lo, c_hi) = noise.fp_confidence;
                let confidence = c_lo + rng.gen::<f64>() * (c_hi - c_lo);
                detections.push((
                    Box3D {
                        x,
                        y,
                        length,
                        width,
                        height,
                        direction: if y >= 0.0 { Direction::Eb } else { Direction::Wb },
                        class,
                    },
                    confidence,
                ));
            }

            DetectionFrame {
                t: frame.t_raw,
                detections: two_stage_nms(cam, &detections),
            }
        })
        .collect()
}
