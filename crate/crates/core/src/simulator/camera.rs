//! Synthetic camera bank: pole-mounted pinhole cameras tiling the corridor,
//! and a frame renderer that reproduces the four documented timestamp
//! defects — phase, clock offset, quantization, and skipped/doubled frames.
//!
//! Raw reported stamps are built by *inverting* the correction model: for a
//! frame truly captured at `t`, the camera reports
//! `quantize(t − offset − residual)`, so `raw + offset + residual` recovers
//! the truth exactly (pre-quantization) and the sync pipeline can be scored
//! against known injected errors. Residuals are zero except on defect
//! frames: a skipped frame carries content one frame period newer than its
//! stamp (residual = +1/fps), and a doubled frame repeats the previous
//! content and stamp verbatim.

use super::{SceneConfig, SceneTruth, SimError};
use crate::geometry::CameraProjection;
use crate::types::{Box3D, Direction};
use crate::util::mix_seed;
use nalgebra::{Matrix3, Matrix3x4, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// 4K frame width in pixels.
pub const FRAME_WIDTH: f64 = 3840.0;
/// 4K frame height in pixels.
pub const FRAME_HEIGHT: f64 = 2160.0;
/// Camera mounting height in feet.
pub const POLE_HEIGHT: f64 = 110.0;

/// Shared timing-defect parameters used when building a camera bank.
/// The default injects no errors beyond 0.01 s stamp quantization and a
/// random per-camera phase (cameras are never frame-aligned in the field).
#[derive(Debug, Clone, PartialEq)]
pub struct TimingConfig {
    pub nominal_fps: f64,
    /// Stamp quantization step in seconds (floor); 0 disables.
    pub quantization: f64,
    /// Per-camera clock offsets are drawn uniformly from this range.
    pub offset_range: (f64, f64),
    /// Per-slot probability of a skipped frame event.
    pub p_skip: f64,
    /// Per-slot probability of a doubled frame event.
    pub p_double: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            nominal_fps: 30.0,
            quantization: 0.01,
            offset_range: (0.0, 0.0),
            p_skip: 0.0,
            p_double: 0.0,
        }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.nominal_fps > 0.0
            && self.quantization >= 0.0
            && self.offset_range.1 >= self.offset_range.0
            && (0.0..=1.0).contains(&self.p_skip)
            && (0.0..=1.0).contains(&self.p_double)
            && self.p_skip + self.p_double <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(
                "timing: fps > 0, quantization >= 0, offset range ordered, probabilities in [0,1] summing to <= 1"
                    .to_string(),
            ))
        }
    }
}

/// One camera of the bank.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraConfig {
    /// Pole/camera id, e.g. `"p2c3"`.
    pub id: String,
    /// Restricts rendered boxes to one travel direction; `None` sees both.
    pub covers: Option<Direction>,
    /// Longitudinal x-range visible to the camera, in feet.
    pub fov: (f64, f64),
    pub projection: CameraProjection,
    pub nominal_fps: f64,
    /// Capture-slot phase in `[0, 1/fps)` seconds.
    pub phase: f64,
    /// Camera clock offset in seconds (raw stamps run this far behind
    /// truth).
    pub clock_offset: f64,
    pub quantization: f64,
    pub p_skip: f64,
    pub p_double: f64,
}

/// A camera bank tiling the corridor with `count` equal fovs of length
/// `fov_len`, mounted on three virtual poles at ¼, ½, and ¾ of the
/// corridor. Adjacent fovs overlap; a layout that would leave coverage
/// gaps (stride exceeding the fov) is rejected, preserving the guarantee
/// that every corridor position is visible to at least one camera.
///
/// Randomness comes from the scene seed, stream `"cameras"`: per camera in
/// corridor order, one phase draw then one clock-offset draw.
pub fn camera_layout(
    scene: &SceneConfig,
    timing: &TimingConfig,
    count: usize,
    fov_len: f64,
) -> Result<Vec<CameraConfig>, SimError> {
    timing.validate()?;
    let length = scene.roadway_length;
    if count == 0 {
        return Err(SimError::InvalidConfig("need at least one camera".to_string()));
    }
    if !(fov_len > 0.0 && fov_len <= length) {
        return Err(SimError::InvalidConfig(
            "camera fov must be positive and no longer than the corridor".to_string(),
        ));
    }
    let stride = if count == 1 {
        0.0
    } else {
        (length - fov_len) / (count as f64 - 1.0)
    };
    if count == 1 && fov_len < length {
        return Err(SimError::InvalidConfig(
            "a single camera must cover the whole corridor".to_string(),
        ));
    }
    if stride >= fov_len {
        return Err(SimError::InvalidConfig(format!(
            "{count} cameras with {fov_len} ft fovs leave coverage gaps over {length} ft"
        )));
    }

    let poles = [0.25 * length, 0.5 * length, 0.75 * length];
    // Roadside setback: beyond the westbound lanes, 20 ft from the edge.
    let y_pole = -(scene.lanes_per_direction as f64 * scene.lane_width + 20.0);
    let y_span = scene.lanes_per_direction as f64 * scene.lane_width + 2.0;

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(scene.seed, "cameras"));
    let mut per_pole_counts = [0usize; 3];
    let mut cameras = Vec::with_capacity(count);
    for i in 0..count {
        let lo = i as f64 * stride;
        let hi = (lo + fov_len).min(length);
        let center = 0.5 * (lo + hi);
        let pole = poles
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (center - **a).abs().total_cmp(&(center - **b).abs()))
            .map(|(k, _)| k)
            .expect("three poles");
        per_pole_counts[pole] += 1;
        let id = format!("p{}c{}", pole + 1, per_pole_counts[pole]);

        let phase = rng.gen_range(0.0..1.0) / timing.nominal_fps;
        let (off_lo, off_hi) = timing.offset_range;
        let clock_offset = if off_hi > off_lo {
            rng.gen_range(off_lo..off_hi)
        } else {
            off_lo
        };

        let projection = build_projection(
            Vector3::new(poles[pole], y_pole, POLE_HEIGHT),
            (lo, hi),
            y_span,
        )?;

        cameras.push(CameraConfig {
            id,
            covers: None,
            fov: (lo, hi),
            projection,
            nominal_fps: timing.nominal_fps,
            phase,
            clock_offset,
            quantization: timing.quantization,
            p_skip: timing.p_skip,
            p_double: timing.p_double,
        });
    }
    Ok(cameras)
}

/// The default bank: 16 cameras with 250-ft fovs (scaled up for corridors
/// long enough that 250 ft would leave gaps).
pub fn default_cameras(scene: &SceneConfig, timing: &TimingConfig) -> Result<Vec<CameraConfig>, SimError> {
    let fov = (250.0 * scene.roadway_length / 2000.0).max(250.0_f64.min(scene.roadway_length));
    camera_layout(scene, timing, 16, fov.min(scene.roadway_length))
}

/// Pinhole projection for a camera at `eye` looking at the center of its
/// fov, focal length auto-sized so the whole fov (ground plane plus 16 ft
/// of height) lands within the central 90 % of the 4K frame.
fn build_projection(
    eye: Vector3<f64>,
    fov: (f64, f64),
    y_span: f64,
) -> Result<CameraProjection, SimError> {
    let target = Vector3::new(0.5 * (fov.0 + fov.1), 0.0, 0.0);
    let forward = (target - eye).normalize();
    let up = Vector3::new(0.0, 0.0, 1.0);
    let right = forward.cross(&up).normalize();
    let down = forward.cross(&right);
    // Rows: camera x (image right), camera y (image down), camera z (depth).
    let rot = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);

    // Normalized coordinates of the fov's extreme corners fix the focal
    // length; every corner must sit in front of the camera.
    let mut max_nx = 0.0f64;
    let mut max_ny = 0.0f64;
    for &x in &[fov.0, fov.1] {
        for &y in &[-y_span, y_span] {
            for &z in &[0.0, 16.0] {
                let p = rot * (Vector3::new(x, y, z) - eye);
                if p[2] <= 0.0 {
                    return Err(SimError::InvalidConfig(format!(
                        "camera at x={} cannot see its fov corner ({x}, {y}, {z})",
                        eye[0]
                    )));
                }
                max_nx = max_nx.max((p[0] / p[2]).abs());
                max_ny = max_ny.max((p[1] / p[2]).abs());
            }
        }
    }
    let f = (0.45 * FRAME_WIDTH / max_nx).min(0.45 * FRAME_HEIGHT / max_ny);
    let k = Matrix3::new(
        f,
        0.0,
        FRAME_WIDTH / 2.0,
        0.0,
        f,
        FRAME_HEIGHT / 2.0,
        0.0,
        0.0,
        1.0,
    );
    let t = -rot * eye;
    let mut rt = Matrix3x4::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
    rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
    CameraProjection::from_matrix(k * rt)
        .map_err(|e| SimError::InvalidConfig(format!("camera projection: {e}")))
}

/// One emitted camera frame: the defect-free truth (capture time and boxes)
/// alongside what the camera actually reports.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    /// Output index in the emitted stream (doubles occupy two indices).
    pub frame_index: u32,
    /// True capture time on the scene clock.
    pub t_true: f64,
    /// Reported stamp: `quantize(t_true − clock_offset − residual)`.
    pub t_raw: f64,
    /// Injected per-frame residual (`+1/fps` on skip frames, else 0).
    pub residual: f64,
    /// True boxes in view, `(vehicle id, box)` in id order.
    pub boxes: Vec<(u64, Box3D)>,
}

/// All frames one camera emits for a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRender {
    pub camera: String,
    pub frames: Vec<RenderedFrame>,
}

impl CameraRender {
    /// Raw (uncorrected) stamps in frame order, for the sync pipeline.
    pub fn stamps(&self) -> Vec<crate::timesync::FrameStamp> {
        self.frames
            .iter()
            .map(|f| crate::timesync::FrameStamp::new(self.camera.clone(), f.frame_index, f.t_raw, 0.0, 0.0))
            .collect()
    }
}

/// Renders one camera's frame stream from the scene truth.
///
/// Capture slots tick at `phase + k / fps` until the scene ends. Per slot
/// one event draw (stream `"render:{camera id}"`) selects: a *skip* (the
/// slot's frame is lost; the next slot's content goes out under this slot's
/// stamp, residual +1/fps, and the stream resumes after it), a *double*
/// (the slot is emitted twice, stamp and content repeated verbatim), or a
/// normal frame. A skip at the final slot degrades to a normal frame.
pub fn render_camera(truth: &SceneTruth, cam: &CameraConfig) -> CameraRender {
    debug_assert!(cam.p_skip + cam.p_double <= 1.0 && cam.p_skip >= 0.0 && cam.p_double >= 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(truth.seed, &format!("render:{}", cam.id)));
    let period = 1.0 / cam.nominal_fps;
    let quantize = |t: f64| {
        if cam.quantization > 0.0 {
            (t / cam.quantization).floor() * cam.quantization
        } else {
            t
        }
    };
    let slot_time = |k: u32| cam.phase + k as f64 * period;
    let in_scene = |k: u32| slot_time(k) <= truth.duration + 1e-9;

    let boxes_at = |t: f64| -> Vec<(u64, Box3D)> {
        truth
            .vehicles
            .iter()
            .filter(|v| cam.covers.is_none_or(|d| d == v.direction))
            .map(|v| (v.id, v.box_at(t)))
            .filter(|(_, b)| {
                let (x_min, x_max, _, _) = b.footprint();
                x_max > cam.fov.0 && x_min < cam.fov.1
            })
            .collect()
    };

    let mut frames = Vec::new();
    let emit = |frames: &mut Vec<RenderedFrame>, t_true: f64, stamp_slot_t: f64, residual: f64| {
        let t_raw = quantize(stamp_slot_t - cam.clock_offset);
        frames.push(RenderedFrame {
            frame_index: frames.len() as u32,
            t_true,
            t_raw,
            residual,
            boxes: boxes_at(t_true),
        });
    };

    let mut k = 0u32;
    while in_scene(k) {
        let u: f64 = rng.gen();
        if u < cam.p_skip && in_scene(k + 1) {
            // Slot k's frame is lost: slot k+1's content ships under slot
            // k's stamp, one period stale.
            emit(&mut frames, slot_time(k + 1), slot_time(k), period);
            k += 2;
        } else if u < cam.p_skip + cam.p_double {
            emit(&mut frames, slot_time(k), slot_time(k), 0.0);
            let dup = frames.last().expect("just pushed").clone();
            frames.push(RenderedFrame {
                frame_index: frames.len() as u32,
                ..dup
            });
            k += 1;
        } else {
            emit(&mut frames, slot_time(k), slot_time(k), 0.0);
            k += 1;
        }
    }

    CameraRender {
        camera: cam.id.clone(),
        frames,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{generate_scene, SceneConfig};
    use super::*;
    use crate::geometry::RoadPoint as RP;

    fn scene() -> SceneTruth {
        generate_scene(&SceneConfig {
            seed: 17,
            vehicle_count: 12,
            duration: 6.0,
            ..SceneConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn sixteen_cameras_tile_the_corridor_with_overlap() {
        let cfg = SceneConfig::default();
        let cams = default_cameras(&cfg, &TimingConfig::default()).unwrap();
        assert_eq!(cams.len(), 16);

        let mut fovs: Vec<(f64, f64)> = cams.iter().map(|c| c.fov).collect();
        fovs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(fovs[0].0.abs() < 1e-9, "coverage starts at the corridor entrance");
        assert!((fovs.last().unwrap().1 - cfg.roadway_length).abs() < 1e-9);
        for pair in fovs.windows(2) {
            assert!(
                pair[1].0 < pair[0].1,
                "adjacent fovs {:?} and {:?} do not overlap",
                pair[0],
                pair[1]
            );
        }

        for cam in &cams {
            assert!((0.0..1.0 / 30.0).contains(&cam.phase));
            assert!(cam.id.starts_with('p') && cam.id.contains('c'));
            // The whole fov projects inside the 4K frame with positive depth.
            for &x in &[cam.fov.0, cam.fov.1] {
                for &y in &[-50.0, 0.0, 50.0] {
                    let px = cam.projection.project(&RP::new(x, y, 0.0)).unwrap();
                    assert!((0.0..=FRAME_WIDTH).contains(&px.u), "{} u={}", cam.id, px.u);
                    assert!((0.0..=FRAME_HEIGHT).contains(&px.v), "{} v={}", cam.id, px.v);
                }
            }
        }
    }

    #[test]
    fn layout_and_rendering_are_deterministic() {
        let cfg = SceneConfig {
            seed: 23,
            ..SceneConfig::default()
        };
        let timing = TimingConfig {
            offset_range: (-0.3, 0.3),
            p_skip: 0.05,
            p_double: 0.05,
            ..TimingConfig::default()
        };
        let a = camera_layout(&cfg, &timing, 16, 250.0).unwrap();
        let b = camera_layout(&cfg, &timing, 16, 250.0).unwrap();
        assert_eq!(a, b);

        let truth = generate_scene(&cfg).unwrap();
        assert_eq!(render_camera(&truth, &a[4]), render_camera(&truth, &b[4]));
    }

    #[test]
    fn zero_corruption_stamps_floor_true_times() {
        let truth = scene();
        let cfg = SceneConfig {
            seed: 17,
            ..SceneConfig::default()
        };
        let cams = default_cameras(&cfg, &TimingConfig::default()).unwrap();
        let render = render_camera(&truth, &cams[7]);
        assert!(!render.frames.is_empty());
        for f in &render.frames {
            assert_eq!(f.residual, 0.0);
            assert_eq!(f.t_raw, (f.t_true / 0.01).floor() * 0.01);
            assert!(f.t_raw <= f.t_true && f.t_true - f.t_raw < 0.01 + 1e-9);
        }
    }

    #[test]
    fn frames_contain_exactly_the_fov_occupants() {
        let truth = scene();
        let cfg = SceneConfig {
            seed: 17,
            ..SceneConfig::default()
        };
        let cams = default_cameras(&cfg, &TimingConfig::default()).unwrap();
        let cam = &cams[8];
        let render = render_camera(&truth, cam);
        let mut saw_any = false;
        for f in &render.frames {
            let expect: Vec<(u64, Box3D)> = truth
                .vehicles
                .iter()
                .map(|v| (v.id, v.box_at(f.t_true)))
                .filter(|(_, b)| {
                    let (x_min, x_max, _, _) = b.footprint();
                    x_max > cam.fov.0 && x_min < cam.fov.1
                })
                .collect();
            assert_eq!(f.boxes, expect);
            saw_any |= !expect.is_empty();
        }
        assert!(saw_any, "camera never saw a vehicle; scene misconfigured");
    }

    #[test]
    fn a_clock_offset_shifts_raw_stamps() {
        let truth = scene();
        let cfg = SceneConfig {
            seed: 17,
            ..SceneConfig::default()
        };
        let timing = TimingConfig {
            offset_range: (0.1, 0.1),
            ..TimingConfig::default()
        };
        let cams = default_cameras(&cfg, &timing).unwrap();
        for cam in &cams {
            assert_eq!(cam.clock_offset, 0.1);
        }
        let render = render_camera(&truth, &cams[3]);
        for f in &render.frames {
            // Invertibility, pre-quantization: true − offset − residual lies
            // in the floored stamp's quantization cell.
            let pre = f.t_true - 0.1 - f.residual;
            assert!(f.t_raw <= pre + 1e-12 && pre - f.t_raw < 0.01 + 1e-9);
        }
    }

    #[test]
    fn doubled_frames_repeat_content_and_stamp() {
        let truth = scene();
        let cfg = SceneConfig {
            seed: 17,
            ..SceneConfig::default()
        };
        let timing = TimingConfig {
            p_double: 1.0,
            ..TimingConfig::default()
        };
        let cams = default_cameras(&cfg, &timing).unwrap();
        let render = render_camera(&truth, &cams[5]);
        assert_eq!(render.frames.len() % 2, 0);
        for pair in render.frames.chunks(2) {
            assert_eq!(pair[0].t_true, pair[1].t_true);
            assert_eq!(pair[0].t_raw, pair[1].t_raw);
            assert_eq!(pair[0].boxes, pair[1].boxes);
            assert_eq!(pair[0].frame_index + 1, pair[1].frame_index);
        }
    }

    #[test]
    fn skipped_frames_carry_a_one_period_residual() {
        let truth = scene();
        let cfg = SceneConfig {
            seed: 17,
            ..SceneConfig::default()
        };
        let timing = TimingConfig {
            p_skip: 1.0,
            quantization: 0.0,
            ..TimingConfig::default()
        };
        let cams = default_cameras(&cfg, &timing).unwrap();
        let cam = &cams[2];
        let render = render_camera(&truth, cam);
        let period = 1.0 / 30.0;
        for (i, f) in render.frames.iter().enumerate() {
            if i + 1 == render.frames.len() {
                continue; // a final-slot skip degrades to a normal frame
            }
            assert_eq!(f.residual, period);
            // Content is one period newer than the stamp says.
            assert!((f.t_true - (f.t_raw + f.residual)).abs() < 1e-9);
        }
        // Every event consumed two slots.
        let slots = ((truth.duration - cam.phase) * 30.0).floor() as usize + 1;
        assert!((render.frames.len() as i64 - (slots as i64 + 1) / 2).abs() <= 1);
    }

    #[test]
    fn gapped_layouts_are_rejected() {
        let cfg = SceneConfig::default();
        // Four 100-ft fovs cannot cover 2000 ft.
        match camera_layout(&cfg, &TimingConfig::default(), 4, 100.0) {
            Err(SimError::InvalidConfig(msg)) => assert!(msg.contains("gaps")),
            other => panic!("expected a coverage-gap rejection, got {other:?}"),
        }
    }
}
