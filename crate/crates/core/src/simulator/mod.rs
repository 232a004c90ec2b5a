//! Deterministic synthetic traffic scenes: the ground-truth oracle for the
//! rest of the toolkit.
//!
//! A scene is a set of vehicles with smooth, collision-free trajectories on
//! a straight multi-lane corridor, plus a bank of roadside cameras that
//! observe them. Vehicle motion is built from piecewise constant-jerk
//! segments, which makes every trajectory exactly representable by the
//! cubic splines the rest of the pipeline fits — representability tests can
//! assert equality instead of tolerances. Cameras ([`camera`]) render true
//! boxes with the documented timestamp defects (phase, clock offset,
//! quantization, skipped/doubled frames), and the detection corrupter
//! ([`corrupt`]) layers on parametric detector noise. Every stage draws
//! from its own seeded random stream, so identical configs reproduce
//! identical scenes byte for byte.
//!
//! Traffic is organized per lane. In free-flow traffic each vehicle holds a
//! constant speed drawn from a band, sorted within the lane so the platoon
//! leader is fastest — gaps then never shrink and the headway guarantee is
//! structural. In stop-and-go traffic every vehicle in a lane follows the
//! same oscillating speed plan (a perfect platoon), so gaps are constant
//! over time and the headway guarantee reduces to the initial spacing.
//!
//! Placement anchors each lane's leader so it reaches the downstream end of
//! the corridor exactly when the scene ends; followers stack upstream with
//! at least a time-headway of spacing and may begin upstream of the
//! corridor entrance, entering mid-scene. A configuration is infeasible
//! when some vehicle could not even reach the entrance before the scene
//! ends — requesting more vehicles than the corridor (plus one scene's
//! travel) can hold fails with [`SimError::InfeasibleDensity`].

mod camera;
mod corrupt;

pub use camera::{
    camera_layout, default_cameras, render_camera, CameraConfig, CameraRender, RenderedFrame,
    TimingConfig, FRAME_HEIGHT, FRAME_WIDTH, POLE_HEIGHT,
};
pub use corrupt::{
    corrupt_detections, ForcedOcclusion, NoiseConfig, OcclusionModel, NMS_PIXEL_IOU, NMS_ROAD_IOU,
};

use crate::types::{Box3D, Direction, VehicleClass};
use crate::util::mix_seed;
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    /// The requested vehicle count cannot be placed with the required
    /// headway: some vehicle would not reach the corridor entrance before
    /// the scene ends.
    #[error("infeasible vehicle density: {0}")]
    InfeasibleDensity(String),
    /// A config field is out of its documented range.
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
}

/// Traffic regime: how per-lane speed plans are built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpeedProfile {
    /// Every vehicle holds a constant speed drawn uniformly from
    /// `[low, high]` ft/s; within a lane speeds are sorted so the platoon
    /// leader is fastest.
    FreeFlow { low: f64, high: f64 },
    /// All vehicles in a lane share one oscillating plan: dwell at a full
    /// stop, S-ramp up to `peak` ft/s over `ramp_s`, cruise, S-ramp down,
    /// repeat. Each lane starts at its own random point in the cycle.
    StopAndGo {
        peak: f64,
        ramp_s: f64,
        cruise_s: f64,
        dwell_s: f64,
    },
}

impl SpeedProfile {
    /// Highest speed the profile can reach; sizes headway gaps.
    fn max_speed(&self) -> f64 {
        match *self {
            SpeedProfile::FreeFlow { high, .. } => high,
            SpeedProfile::StopAndGo { peak, .. } => peak,
        }
    }
}

/// Scene recipe. All randomness derives from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub seed: u64,
    /// Scene length in seconds.
    pub duration: f64,
    pub lanes_per_direction: u32,
    /// Lane width in feet.
    pub lane_width: f64,
    /// Instrumented corridor length in feet.
    pub roadway_length: f64,
    pub vehicle_count: u32,
    pub profile: SpeedProfile,
    /// Class draw weights in [`VehicleClass::ALL`] order (need not sum
    /// to 1). The default mirrors the measured class frequencies of the
    /// dimension survey.
    pub class_mix: [f64; 6],
    /// Minimum time headway between a follower's front and its leader's
    /// rear, in seconds.
    pub headway: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            seed: 0,
            duration: 10.0,
            lanes_per_direction: 4,
            lane_width: 12.0,
            roadway_length: 2000.0,
            vehicle_count: 20,
            profile: SpeedProfile::FreeFlow {
                low: 90.0,
                high: 110.0,
            },
            class_mix: [16.0, 28.0, 7.0, 9.0, 7.0, 5.0],
            headway: 1.0,
        }
    }
}

impl SceneConfig {
    /// Field-range validation; generation assumes it has passed.
    pub fn validate(&self) -> Result<(), SimError> {
        let require = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(SimError::InvalidConfig(msg.to_string()))
            }
        };
        require(self.duration > 0.0, "duration must be positive")?;
        require(self.lanes_per_direction >= 1, "need at least one lane")?;
        require(self.lane_width > 0.0, "lane width must be positive")?;
        require(self.roadway_length > 0.0, "roadway length must be positive")?;
        require(self.vehicle_count >= 1, "need at least one vehicle")?;
        require(self.headway > 0.0, "headway must be positive")?;
        require(
            self.class_mix.iter().all(|w| w.is_finite() && *w >= 0.0)
                && self.class_mix.iter().sum::<f64>() > 0.0,
            "class mix must be non-negative and not all zero",
        )?;
        match self.profile {
            SpeedProfile::FreeFlow { low, high } => {
                require(low > 0.0 && high >= low, "free-flow band must be 0 < low <= high")?;
            }
            SpeedProfile::StopAndGo {
                peak,
                ramp_s,
                cruise_s,
                dwell_s,
            } => {
                require(peak > 0.0, "stop-and-go peak must be positive")?;
                require(ramp_s > 0.0, "ramp time must be positive")?;
                require(cruise_s >= 0.0 && dwell_s >= 0.0, "cruise/dwell must be non-negative")?;
            }
        }
        Ok(())
    }
}

/// One constant-jerk piece of a motion plan, valid from `t0` until the next
/// segment starts. `s0`, `v0`, `a0` are distance/speed/acceleration at `t0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JerkSegment {
    pub t0: f64,
    pub s0: f64,
    pub v0: f64,
    pub a0: f64,
    pub jerk: f64,
}

impl JerkSegment {
    fn distance(&self, t: f64) -> f64 {
        let dt = t - self.t0;
        self.s0 + dt * (self.v0 + dt * (self.a0 / 2.0 + dt * self.jerk / 6.0))
    }

    fn speed(&self, t: f64) -> f64 {
        let dt = t - self.t0;
        self.v0 + dt * (self.a0 + dt * self.jerk / 2.0)
    }

    fn accel(&self, t: f64) -> f64 {
        self.a0 + (t - self.t0) * self.jerk
    }
}

/// Distance traveled along the lane as a function of time: piecewise
/// constant-jerk, continuous in position, speed, and acceleration, with
/// `distance_at(0) == 0`. Distance is non-decreasing (speeds never go
/// negative), so it can be shared by every vehicle in a platoon.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionPlan {
    /// Non-empty, sorted by `t0`, first segment at `t0 == 0`.
    segments: Vec<JerkSegment>,
}

impl MotionPlan {
    /// Single-segment plan: constant speed forever.
    pub fn constant(speed: f64) -> MotionPlan {
        MotionPlan {
            segments: vec![JerkSegment {
                t0: 0.0,
                s0: 0.0,
                v0: speed,
                a0: 0.0,
                jerk: 0.0,
            }],
        }
    }

    /// Stop-and-go cycle: dwell at rest, two-piece S-ramp to `peak`, cruise,
    /// S-ramp back down, repeated until the plan covers `horizon` seconds.
    /// `phase` starts the plan that many seconds into the cycle, so lanes
    /// built from the same template oscillate out of step.
    pub fn stop_and_go(peak: f64, ramp_s: f64, cruise_s: f64, dwell_s: f64, phase: f64, horizon: f64) -> MotionPlan {
        // Two constant-jerk halves per ramp: jerk sized so each half gains
        // peak/2 of speed (Δv = j·(r/2)²/2).
        let half = ramp_s / 2.0;
        let jerk = 4.0 * peak / (ramp_s * ramp_s);
        let period = dwell_s + 2.0 * ramp_s + cruise_s;

        let mut segments = Vec::new();
        let mut t = 0.0;
        let mut s = 0.0;
        let push = |segments: &mut Vec<JerkSegment>, t: &mut f64, s: &mut f64, len: f64, v0: f64, a0: f64, j: f64| {
            let seg = JerkSegment {
                t0: *t,
                s0: *s,
                v0,
                a0,
                jerk: j,
            };
            *t += len;
            *s = seg.distance(*t);
            segments.push(seg);
        };
        let cycles = ((phase + horizon) / period).ceil() as usize + 1;
        for _ in 0..cycles {
            if dwell_s > 0.0 {
                push(&mut segments, &mut t, &mut s, dwell_s, 0.0, 0.0, 0.0);
            }
            push(&mut segments, &mut t, &mut s, half, 0.0, 0.0, jerk);
            push(&mut segments, &mut t, &mut s, half, peak / 2.0, jerk * half, -jerk);
            if cruise_s > 0.0 {
                push(&mut segments, &mut t, &mut s, cruise_s, peak, 0.0, 0.0);
            }
            push(&mut segments, &mut t, &mut s, half, peak, 0.0, -jerk);
            push(&mut segments, &mut t, &mut s, half, peak / 2.0, -jerk * half, jerk);
        }
        MotionPlan { segments }.rebase(phase)
    }

    /// Re-anchors the plan so that time `at` becomes t = 0 with distance 0.
    pub fn rebase(&self, at: f64) -> MotionPlan {
        let first = JerkSegment {
            t0: 0.0,
            s0: 0.0,
            v0: self.speed_at(at),
            a0: self.accel_at(at),
            jerk: self.locate(at).jerk,
        };
        let s_at = self.distance_at(at);
        let mut segments = vec![first];
        segments.extend(
            self.segments
                .iter()
                .filter(|seg| seg.t0 > at)
                .map(|seg| JerkSegment {
                    t0: seg.t0 - at,
                    s0: seg.s0 - s_at,
                    ..*seg
                }),
        );
        MotionPlan { segments }
    }

    fn locate(&self, t: f64) -> &JerkSegment {
        match self.segments.iter().rposition(|seg| seg.t0 <= t) {
            Some(i) => &self.segments[i],
            None => &self.segments[0],
        }
    }

    /// Distance traveled since t = 0 (feet; extrapolates the end segments).
    pub fn distance_at(&self, t: f64) -> f64 {
        self.locate(t).distance(t)
    }

    /// Speed in ft/s.
    pub fn speed_at(&self, t: f64) -> f64 {
        self.locate(t).speed(t)
    }

    /// Acceleration in ft/s².
    pub fn accel_at(&self, t: f64) -> f64 {
        self.locate(t).accel(t)
    }

    /// Times where polynomial coefficients change, for representability
    /// checks (spline fits need knots at least this fine).
    pub fn knot_times(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.t0).collect()
    }
}

/// One vehicle of the ground truth: fixed body, lane, and a motion plan.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleTruth {
    /// 1-based id in placement order.
    pub id: u64,
    pub class: VehicleClass,
    pub direction: Direction,
    /// 1-based lane index within the direction, lane 1 nearest the median.
    pub lane: u32,
    /// Lane-center lateral position (constant; the simulator does not model
    /// lane changes).
    pub y: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    /// Rear-face x at t = 0.
    pub rear_x0: f64,
    pub plan: MotionPlan,
}

impl VehicleTruth {
    /// True box at time `t`.
    pub fn box_at(&self, t: f64) -> Box3D {
        Box3D {
            x: self.rear_x0 + self.direction.sign() * self.plan.distance_at(t),
            y: self.y,
            length: self.length,
            width: self.width,
            height: self.height,
            direction: self.direction,
            class: self.class,
        }
    }

    pub fn speed_at(&self, t: f64) -> f64 {
        self.plan.speed_at(t)
    }
}

/// Complete scene ground truth: continuous trajectories plus the scalars
/// cameras and exporters need. `seed` is carried along so per-camera render
/// and corruption streams can be derived without re-threading the config.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneTruth {
    pub seed: u64,
    pub duration: f64,
    pub roadway_length: f64,
    pub lane_width: f64,
    pub lanes_per_direction: u32,
    pub vehicles: Vec<VehicleTruth>,
}

impl SceneTruth {
    /// Whether the vehicle's footprint intersects the instrumented corridor
    /// `[0, roadway_length]` at time `t`.
    pub fn visible(&self, v: &VehicleTruth, t: f64) -> bool {
        let (x_min, x_max, _, _) = v.box_at(t).footprint();
        x_max > 0.0 && x_min < self.roadway_length
    }

    /// All vehicles inside the corridor at time `t`, as `(id, box)` pairs in
    /// id order.
    pub fn boxes_at(&self, t: f64) -> Vec<(u64, Box3D)> {
        self.vehicles
            .iter()
            .filter(|v| self.visible(v, t))
            .map(|v| (v.id, v.box_at(t)))
            .collect()
    }

    /// Ground-truth series sampled at `rate` Hz on the scene clock, each
    /// vehicle contributing only while its footprint intersects the
    /// corridor. This is the oracle series evaluation consumes.
    pub fn sample_ground_truth(&self, rate: f64) -> std::collections::BTreeMap<u64, Vec<(f64, Box3D)>> {
        let dt = 1.0 / rate;
        let ticks = (self.duration / dt + 1e-9).floor() as usize + 1;
        let mut series = std::collections::BTreeMap::new();
        for v in &self.vehicles {
            let samples: Vec<(f64, Box3D)> = (0..ticks)
                .map(|k| k as f64 * dt)
                .filter(|&t| self.visible(v, t))
                .map(|t| (t, v.box_at(t)))
                .collect();
            if !samples.is_empty() {
                series.insert(v.id, samples);
            }
        }
        series
    }
}

/// Typical body dimensions per class (length, width, height in feet);
/// per-vehicle jitter of ±5 % is applied on top.
fn class_dims(class: VehicleClass) -> (f64, f64, f64) {
    match class {
        VehicleClass::Sedan => (15.5, 6.0, 4.7),
        VehicleClass::Midsize => (16.5, 6.4, 5.5),
        VehicleClass::Van => (19.0, 6.8, 8.0),
        VehicleClass::Pickup => (19.5, 6.7, 6.3),
        VehicleClass::Semi => (70.0, 8.5, 13.0),
        VehicleClass::Truck => (26.0, 8.0, 10.5),
    }
}

/// Generates the scene ground truth for a config.
///
/// Deterministic given the seed: one stream (`"scene"`) drives generation
/// with a documented draw order — first one cycle-phase draw per stop-and-go
/// lane (eastbound lanes 1..n then westbound 1..n), then per vehicle in id
/// order: class (weighted), three ±5 % dimension jitters, the free-flow
/// speed (free-flow only), and an extra-gap fraction.
///
/// Placement stacks each lane back to front: the leader is anchored so it
/// reaches the downstream corridor end exactly at `duration`, and each
/// follower sits a time-headway (plus its extra gap) behind the body ahead.
/// Followers may start upstream of the corridor and enter mid-scene; if any
/// vehicle cannot reach the entrance by scene end the config is declared
/// [`SimError::InfeasibleDensity`].
pub fn generate_scene(cfg: &SceneConfig) -> Result<SceneTruth, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, "scene"));

    // Lane list in draw order: EB 1..n, then WB 1..n.
    let n = cfg.lanes_per_direction;
    let lanes: Vec<(Direction, u32)> = (1..=n)
        .map(|k| (Direction::Eb, k))
        .chain((1..=n).map(|k| (Direction::Wb, k)))
        .collect();

    // Draw block 1: per-lane cycle phases (stop-and-go only).
    let lane_plans: Vec<MotionPlan> = lanes
        .iter()
        .map(|_| match cfg.profile {
            SpeedProfile::FreeFlow { .. } => MotionPlan::constant(0.0), // placeholder, unused
            SpeedProfile::StopAndGo {
                peak,
                ramp_s,
                cruise_s,
                dwell_s,
            } => {
                let period = dwell_s + 2.0 * ramp_s + cruise_s;
                let phase = rng.gen_range(0.0..period);
                MotionPlan::stop_and_go(peak, ramp_s, cruise_s, dwell_s, phase, cfg.duration)
            }
        })
        .collect();

    // Draw block 2: per-vehicle bodies in id order.
    let weights = WeightedIndex::new(cfg.class_mix)
        .map_err(|e| SimError::InvalidConfig(format!("class mix: {e}")))?;
    struct Body {
        class: VehicleClass,
        dims: (f64, f64, f64),
        speed: f64,
        extra_gap: f64,
    }
    let bodies: Vec<Body> = (0..cfg.vehicle_count)
        .map(|_| {
            let class = VehicleClass::ALL[weights.sample(&mut rng)];
            let (l, w, h) = class_dims(class);
            let mut jitter = |base: f64| base * rng.gen_range(0.95..1.05);
            let dims = (jitter(l), jitter(w), jitter(h));
            let speed = match cfg.profile {
                SpeedProfile::FreeFlow { low, high } => {
                    if high > low {
                        rng.gen_range(low..=high)
                    } else {
                        low
                    }
                }
                SpeedProfile::StopAndGo { .. } => 0.0,
            };
            let extra_gap = rng.gen_range(0.0..=0.5) * cfg.headway * cfg.profile.max_speed();
            Body {
                class,
                dims,
                speed,
                extra_gap,
            }
        })
        .collect();

    // Distribute vehicles over lanes round-robin, preserving id order as
    // platoon order (index 0 = leader).
    let mut per_lane: Vec<Vec<usize>> = vec![Vec::new(); lanes.len()];
    for (i, lane_bucket) in (0..bodies.len()).map(|i| (i, i % lanes.len())) {
        per_lane[lane_bucket].push(i);
    }

    let mut vehicles: Vec<Option<VehicleTruth>> = (0..bodies.len()).map(|_| None).collect();
    for (lane_idx, members) in per_lane.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let (direction, lane_no) = lanes[lane_idx];
        let sign = direction.sign();
        let y = sign * (lane_no as f64 - 0.5) * cfg.lane_width;
        let downstream_edge = match direction {
            Direction::Eb => cfg.roadway_length,
            Direction::Wb => 0.0,
        };

        // Free-flow: sort the lane's drawn speeds so the leader is fastest
        // and gaps can only grow.
        let mut speeds: Vec<f64> = members.iter().map(|&i| bodies[i].speed).collect();
        if matches!(cfg.profile, SpeedProfile::FreeFlow { .. }) {
            speeds.sort_by(|a, b| b.total_cmp(a));
        }

        let mut prev_rear = f64::NAN;
        for (slot, &i) in members.iter().enumerate() {
            let body = &bodies[i];
            let plan = match cfg.profile {
                SpeedProfile::FreeFlow { .. } => MotionPlan::constant(speeds[slot]),
                SpeedProfile::StopAndGo { .. } => lane_plans[lane_idx].clone(),
            };
            let speed0 = plan.speed_at(0.0);
            let front = if slot == 0 {
                // Leader exits exactly at scene end (its own extra gap pulls
                // it back a little, staggering lanes).
                downstream_edge - sign * (plan.distance_at(cfg.duration) + body.extra_gap)
            } else {
                // Required spacing uses the larger of the follower's current
                // speed and the profile ceiling the platoon can reach, so
                // constant-gap platoons stay legal at their fastest.
                let gap = match cfg.profile {
                    SpeedProfile::FreeFlow { .. } => cfg.headway * speed0,
                    SpeedProfile::StopAndGo { .. } => cfg.headway * cfg.profile.max_speed(),
                };
                prev_rear - sign * (gap + body.extra_gap)
            };
            let rear = front - sign * body.dims.0;
            prev_rear = rear;

            // Feasibility: the front must reach the corridor entrance by the
            // end of the scene.
            let front_at_end = front + sign * plan.distance_at(cfg.duration);
            let entered = match direction {
                Direction::Eb => front_at_end >= 0.0,
                Direction::Wb => front_at_end <= cfg.roadway_length,
            };
            if !entered {
                return Err(SimError::InfeasibleDensity(format!(
                    "vehicle {} in {} lane {} cannot reach the corridor within {} s",
                    i + 1,
                    direction,
                    lane_no,
                    cfg.duration
                )));
            }

            vehicles[i] = Some(VehicleTruth {
                id: i as u64 + 1,
                class: body.class,
                direction,
                lane: lane_no,
                y,
                length: body.dims.0,
                width: body.dims.1,
                height: body.dims.2,
                rear_x0: rear,
                plan,
            });
        }
    }

    Ok(SceneTruth {
        seed: cfg.seed,
        duration: cfg.duration,
        roadway_length: cfg.roadway_length,
        lane_width: cfg.lane_width,
        lanes_per_direction: cfg.lanes_per_direction,
        vehicles: vehicles.into_iter().map(|v| v.expect("placed")).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_flow(seed: u64, count: u32, duration: f64) -> SceneConfig {
        SceneConfig {
            seed,
            vehicle_count: count,
            duration,
            ..SceneConfig::default()
        }
    }

    fn congested(seed: u64, count: u32, duration: f64) -> SceneConfig {
        SceneConfig {
            profile: SpeedProfile::StopAndGo {
                peak: 40.0,
                ramp_s: 4.0,
                cruise_s: 6.0,
                dwell_s: 4.0,
            },
            ..free_flow(seed, count, duration)
        }
    }

    #[test]
    fn identical_seeds_reproduce_the_scene_bit_for_bit() {
        let a = generate_scene(&free_flow(7, 18, 12.0)).unwrap();
        let b = generate_scene(&free_flow(7, 18, 12.0)).unwrap();
        assert_eq!(a, b);

        let c = generate_scene(&free_flow(8, 18, 12.0)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn free_flow_speeds_stay_inside_the_band() {
        let truth = generate_scene(&free_flow(3, 10, 10.0)).unwrap();
        assert_eq!(truth.vehicles.len(), 10);
        for v in &truth.vehicles {
            let speeds: Vec<f64> = (0..=100).map(|k| v.speed_at(k as f64 * 0.1)).collect();
            for &s in &speeds {
                assert!((90.0..=110.0).contains(&s), "vehicle {} speed {s}", v.id);
            }
            // Free-flow speed is constant, not merely banded.
            let spread = speeds.iter().cloned().fold(f64::MIN, f64::max)
                - speeds.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread.abs() < 1e-12);
        }
    }

    #[test]
    fn stop_and_go_oscillates_through_full_stops() {
        let truth = generate_scene(&congested(11, 8, 40.0)).unwrap();
        for v in &truth.vehicles {
            let speeds: Vec<f64> = (0..=4000).map(|k| v.speed_at(k as f64 * 0.01)).collect();
            let max = speeds.iter().cloned().fold(f64::MIN, f64::max);
            let min = speeds.iter().cloned().fold(f64::MAX, f64::min);
            assert!(min.abs() < 1e-9, "vehicle {} never stops (min {min})", v.id);
            assert!(max > 0.9 * 40.0, "vehicle {} never gets moving (max {max})", v.id);
            assert!(max <= 40.0 + 1e-9);
        }
    }

    #[test]
    fn acceleration_is_continuous_across_plan_knots() {
        let plan = MotionPlan::stop_and_go(40.0, 4.0, 6.0, 4.0, 3.3, 30.0);
        for &t in &plan.knot_times() {
            if t <= 0.0 {
                continue;
            }
            let before = plan.accel_at(t - 1e-9);
            let after = plan.accel_at(t + 1e-9);
            assert!(
                (before - after).abs() < 1e-5,
                "accel jumps at knot {t}: {before} vs {after}"
            );
            let v_before = plan.speed_at(t - 1e-9);
            let v_after = plan.speed_at(t + 1e-9);
            assert!((v_before - v_after).abs() < 1e-7);
        }
    }

    #[test]
    fn rebase_shifts_the_time_origin_exactly() {
        let plan = MotionPlan::stop_and_go(40.0, 4.0, 6.0, 4.0, 0.0, 30.0);
        let shifted = plan.rebase(5.25);
        for k in 0..200 {
            let t = k as f64 * 0.1;
            let want = plan.distance_at(t + 5.25) - plan.distance_at(5.25);
            assert!((shifted.distance_at(t) - want).abs() < 1e-9);
            assert!((shifted.speed_at(t) - plan.speed_at(t + 5.25)).abs() < 1e-9);
        }
        assert_eq!(shifted.distance_at(0.0), 0.0);
    }

    /// Same-lane gaps never close below the follower's time headway, in
    /// either regime.
    #[test]
    fn same_lane_gaps_respect_the_headway() {
        for cfg in [free_flow(21, 24, 15.0), congested(22, 40, 20.0)] {
            let truth = generate_scene(&cfg).unwrap();
            let mut lanes: std::collections::BTreeMap<(Direction, u32), Vec<&VehicleTruth>> =
                std::collections::BTreeMap::new();
            for v in &truth.vehicles {
                lanes.entry((v.direction, v.lane)).or_default().push(v);
            }
            for members in lanes.values() {
                for pair in members.windows(2) {
                    let (lead, follow) = (pair[0], pair[1]);
                    for k in 0..=150 {
                        let t = k as f64 * 0.1;
                        let lead_rear = lead.box_at(t).x;
                        let follow_front = follow.box_at(t).front_x();
                        let gap = follow.direction.sign() * (lead_rear - follow_front);
                        let required = follow.speed_at(t) * cfg.headway;
                        assert!(
                            gap >= required - 1e-6,
                            "gap {gap} < required {required} at t={t} between {} and {}",
                            lead.id,
                            follow.id
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn every_vehicle_enters_the_corridor_by_scene_end() {
        let cfg = free_flow(5, 60, 18.0);
        let truth = generate_scene(&cfg).unwrap();
        assert_eq!(truth.vehicles.len(), 60);
        for v in &truth.vehicles {
            let b = v.box_at(cfg.duration);
            let entered = match v.direction {
                Direction::Eb => b.front_x() >= 0.0,
                Direction::Wb => b.front_x() <= cfg.roadway_length,
            };
            assert!(entered, "vehicle {} never entered", v.id);
        }
    }

    #[test]
    fn overfilling_a_lane_is_infeasible() {
        // Stop-and-go barely moves, so capacity is roughly the corridor
        // length over the per-vehicle spacing; 400 vehicles over 8 lanes of
        // a 1000-ft corridor cannot fit.
        let cfg = SceneConfig {
            roadway_length: 1000.0,
            vehicle_count: 400,
            ..congested(9, 400, 10.0)
        };
        match generate_scene(&cfg) {
            Err(SimError::InfeasibleDensity(_)) => {}
            other => panic!("expected InfeasibleDensity, got {other:?}"),
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        let base = SceneConfig::default();
        let bad = [
            SceneConfig {
                duration: 0.0,
                ..base.clone()
            },
            SceneConfig {
                vehicle_count: 0,
                ..base.clone()
            },
            SceneConfig {
                lanes_per_direction: 0,
                ..base.clone()
            },
            SceneConfig {
                class_mix: [0.0; 6],
                ..base.clone()
            },
            SceneConfig {
                profile: SpeedProfile::FreeFlow {
                    low: 50.0,
                    high: 40.0,
                },
                ..base.clone()
            },
            SceneConfig {
                headway: -1.0,
                ..base.clone()
            },
        ];
        for cfg in bad {
            assert!(matches!(generate_scene(&cfg), Err(SimError::InvalidConfig(_))));
        }
    }

    #[test]
    fn ground_truth_series_covers_only_corridor_time() {
        let cfg = free_flow(13, 12, 10.0);
        let truth = generate_scene(&cfg).unwrap();
        let series = truth.sample_ground_truth(30.0);
        assert!(!series.is_empty());
        for (id, samples) in &series {
            let v = &truth.vehicles[(*id - 1) as usize];
            for (t, b) in samples {
                let (x_min, x_max, _, _) = b.footprint();
                assert!(x_max > 0.0 && x_min < cfg.roadway_length);
                assert!((b.x - v.box_at(*t).x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lane_centers_sit_on_the_expected_side() {
        let truth = generate_scene(&free_flow(2, 16, 10.0)).unwrap();
        for v in &truth.vehicles {
            let expect = v.direction.sign() * (v.lane as f64 - 0.5) * 12.0;
            assert_eq!(v.y, expect);
            match v.direction {
                Direction::Eb => assert!(v.y > 0.0),
                Direction::Wb => assert!(v.y < 0.0),
            }
        }
    }
}
