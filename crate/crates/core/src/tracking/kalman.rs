//! Constant-velocity Kalman filter in roadway coordinates.
//!
//! State is (x, y, vx, vy) in feet and feet/second; only position is
//! measured. Dimensions are not filtered — a vehicle's true l/w/h never
//! change, so tracks pin them at first detection.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, Vector2, Vector4};

use crate::types::{Box3D, Direction, VehicleClass};

use super::{Detection, TrackingError};

/// Process/measurement noise, per-second and absolute respectively.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanConfig {
    /// Process noise rate diag(x, y, vx, vy): ft²/s, ft²/s, ft²/s³, ft²/s³.
    pub q_diag: [f64; 4],
    /// Measurement noise diag(x, y) in ft². Zero means detections are exact.
    pub r_diag: [f64; 2],
}

impl Default for KalmanConfig {
    fn default() -> Self {
        KalmanConfig {
            q_diag: [0.5, 0.1, 2.0, 0.5],
            r_diag: [1.0, 0.25],
        }
    }
}

/// Fresh-track state uncertainty: position at measurement scale, velocity
/// wide enough (20 ft/s longitudinal std) that highway speeds are absorbed
/// within the first few updates.
const P0_DIAG: [f64; 4] = [1.0, 0.25, 400.0, 25.0];

/// One tracked vehicle's filter state and lifecycle counters.
#[derive(Debug, Clone)]
pub struct TrackState {
    pub id: u64,
    /// (x, y, vx, vy).
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    /// Fixed at first detection for the life of the track.
    pub dims: (f64, f64, f64),
    pub direction: Direction,
    /// Ticks since creation.
    pub age: u32,
    /// Consecutive missed ticks.
    pub misses: u32,
    /// Consecutive matched ticks (gates confirmation).
    pub hits: u32,
    /// Votes per class, with the tick each class was last seen (majority
    /// vote, ties to the most recent).
    pub class_votes: Vec<(VehicleClass, u32, u32)>,
}

impl TrackState {
    /// Starts a tentative track centered on a detection, with zero initial
    /// velocity and wide velocity uncertainty.
    pub fn from_detection(id: u64, det: &Detection) -> Self {
        let b = &det.box3d;
        let mut s = TrackState {
            id,
            mean: Vector4::new(b.x, b.y, 0.0, 0.0),
            covariance: Matrix4::from_diagonal(&Vector4::from(P0_DIAG)),
            dims: (b.length, b.width, b.height),
            direction: b.direction,
            age: 0,
            misses: 0,
            hits: 1,
            class_votes: Vec::new(),
        };
        s.vote_class(b.class, 0);
        s
    }

    /// Records a class observation at `tick`.
    pub fn vote_class(&mut self, class: VehicleClass, tick: u32) {
        for (c, n, last) in self.class_votes.iter_mut() {
            if *c == class {
                *n += 1;
                *last = tick;
                return;
            }
        }
        self.class_votes.push((class, 1, tick));
    }

    /// Majority class; ties broken by the most recently seen class.
    pub fn voted_class(&self) -> VehicleClass {
        self.class_votes
            .iter()
            .max_by_key(|(_, n, last)| (*n, *last))
            .map(|(c, _, _)| *c)
            .expect("tracks always carry at least the spawning class")
    }

    /// The track's current box estimate (filtered position, fixed dims).
    pub fn to_box(&self) -> Box3D {
        Box3D {
            x: self.mean[0],
            y: self.mean[1],
            length: self.dims.0,
            width: self.dims.1,
            height: self.dims.2,
            direction: self.direction,
            class: self.voted_class(),
        }
    }
}

/// Advances a track `dt` seconds under the constant-velocity model:
/// positions move by v·dt and the covariance gains dt·Q of process noise.
pub fn kalman_predict(s: &TrackState, cfg: &KalmanConfig, dt: f64) -> TrackState {
    debug_assert!(dt >= 0.0);
    let f = Matrix4::new(
        1.0, 0.0, dt, 0.0, //
        0.0, 1.0, 0.0, dt, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    );
    let q = Matrix4::from_diagonal(&Vector4::from(cfg.q_diag)) * dt;
    let mut out = s.clone();
    out.mean = f * s.mean;
    out.covariance = f * s.covariance * f.transpose() + q;
    out
}

/// Folds a position measurement into the track (standard linear update,
/// Joseph-form covariance so the result stays symmetric positive definite
/// even with zero measurement noise).
pub fn kalman_update(
    s: &TrackState,
    cfg: &KalmanConfig,
    z: &Detection,
) -> Result<TrackState, TrackingError> {
    if z.box3d.direction != s.direction {
        return Err(TrackingError::DirectionMismatch);
    }
    let h = Matrix2x4::new(
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0,
    );
    let r = Matrix2::from_diagonal(&Vector2::new(cfg.r_diag[0], cfg.r_diag[1]));
    let zv = Vector2::new(z.box3d.x, z.box3d.y);

    let p = s.covariance;
    let innovation = zv - h * s.mean;
    let s_mat = h * p * h.transpose() + r;
    let s_inv = s_mat
        .try_inverse()
        .expect("innovation covariance is positive definite");
    let k: Matrix4x2<f64> = p * h.transpose() * s_inv;

    let mut out = s.clone();
    out.mean = s.mean + k * innovation;
    let i_kh = Matrix4::identity() - k * h;
    out.covariance = i_kh * p * i_kh.transpose() + k * r * k.transpose();
    // Clear any asymmetry left by rounding before it can accumulate.
    out.covariance = (out.covariance + out.covariance.transpose()) * 0.5;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::VehicleClass;
    use approx::assert_relative_eq;
    use nalgebra::Cholesky;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn det(x: f64, y: f64) -> Detection {
        Detection {
            box3d: Box3D {
                x,
                y,
                length: 16.0,
                width: 6.0,
                height: 5.0,
                direction: Direction::Eb,
                class: VehicleClass::Sedan,
            },
            confidence: 1.0,
            camera: "p1c1".to_string(),
            t: 0.0,
        }
    }

    fn fresh(x: f64, y: f64) -> TrackState {
        TrackState::from_detection(1, &det(x, y))
    }

    #[test]
    fn zero_dt_prediction_is_identity() {
        let cfg = KalmanConfig::default();
        let s = fresh(10.0, 6.0);
        let p = kalman_predict(&s, &cfg, 0.0);
        assert_eq!(p.mean, s.mean);
        assert_eq!(p.covariance, s.covariance);
    }

    #[test]
    fn position_advances_by_velocity_times_dt() {
        let cfg = KalmanConfig::default();
        let mut s = fresh(0.0, 0.0);
        s.mean[2] = 100.0;
        let p = kalman_predict(&s, &cfg, 1.0 / 15.0);
        assert_relative_eq!(p.mean[0], 100.0 / 15.0, epsilon = 1e-12);
        assert_relative_eq!(p.mean[0], 6.6667, epsilon = 1e-4);
    }

    #[test]
    fn covariance_trace_grows_under_prediction() {
        let cfg = KalmanConfig::default();
        let s = fresh(0.0, 0.0);
        let p = kalman_predict(&s, &cfg, 0.5);
        assert!(p.covariance.trace() > s.covariance.trace());
    }

    #[test]
    fn update_with_predicted_position_leaves_mean_unchanged() {
        let cfg = KalmanConfig::default();
        let s = fresh(25.0, -6.0);
        let u = kalman_update(&s, &cfg, &det(25.0, -6.0)).unwrap();
        assert_relative_eq!(u.mean[0], 25.0, epsilon = 1e-12);
        assert_relative_eq!(u.mean[1], -6.0, epsilon = 1e-12);
        // Velocity cannot move either: zero innovation scales to zero.
        assert_relative_eq!(u.mean[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_measurement_noise_pins_mean_to_measurement() {
        let cfg = KalmanConfig {
            r_diag: [0.0, 0.0],
            ..KalmanConfig::default()
        };
        let s = fresh(0.0, 0.0);
        let u = kalman_update(&s, &cfg, &det(3.7, 1.1)).unwrap();
        assert_relative_eq!(u.mean[0], 3.7, epsilon = 1e-9);
        assert_relative_eq!(u.mean[1], 1.1, epsilon = 1e-9);
    }

    #[test]
    fn repeated_updates_contract_toward_fixed_measurement() {
        // Without predicts the position behaves as a scalar filter with
        // P₀ = R = 1: update n scales the error by n/(n+1) and the product
        // telescopes, so after 20 updates the error is exactly 10/21.
        let cfg = KalmanConfig::default();
        let mut s = fresh(0.0, 0.0);
        let target = det(10.0, 2.0);
        let mut last_err = f64::INFINITY;
        for _ in 0..20 {
            s = kalman_update(&s, &cfg, &target).unwrap();
            let err = (s.mean[0] - 10.0).abs();
            assert!(err < last_err, "error must contract");
            last_err = err;
        }
        assert_relative_eq!(last_err, 10.0 / 21.0, epsilon = 1e-9);
    }

    #[test]
    fn direction_mismatch_is_rejected() {
        let cfg = KalmanConfig::default();
        let s = fresh(0.0, 6.0);
        let mut wb = det(0.0, 6.0);
        wb.box3d.direction = Direction::Wb;
        assert!(matches!(
            kalman_update(&s, &cfg, &wb),
            Err(TrackingError::DirectionMismatch)
        ));
    }

    #[test]
    fn covariance_stays_spd_through_random_sequences() {
        let cfg = KalmanConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut s = fresh(rng.gen_range(-50.0..50.0), rng.gen_range(-12.0..12.0));
            for _ in 0..60 {
                if rng.gen_bool(0.6) {
                    s = kalman_predict(&s, &cfg, rng.gen_range(0.0..0.5));
                } else {
                    s = kalman_update(
                        &s,
                        &cfg,
                        &det(rng.gen_range(-60.0..60.0), rng.gen_range(-12.0..12.0)),
                    )
                    .unwrap();
                }
                assert!(
                    Cholesky::new(s.covariance).is_some(),
                    "covariance lost positive definiteness"
                );
            }
        }
    }

    #[test]
    fn class_votes_use_majority_with_recency_ties() {
        let mut s = fresh(0.0, 0.0); // spawns with 1 sedan vote at tick 0
        s.vote_class(VehicleClass::Pickup, 1);
        assert_eq!(s.voted_class(), VehicleClass::Pickup, "1–1 tie goes to the later class");
        s.vote_class(VehicleClass::Sedan, 2);
        assert_eq!(s.voted_class(), VehicleClass::Sedan, "majority 2–1");
        s.vote_class(VehicleClass::Pickup, 3);
        assert_eq!(s.voted_class(), VehicleClass::Pickup, "2–2 tie goes to the later class");
    }
}
