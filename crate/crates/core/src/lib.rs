//! Multi-camera 3D vehicle tracking in a shared roadway coordinate frame.
//!
//! The toolkit covers the full pipeline for a corridor instrumented with
//! pole-mounted cameras:
//!
//! * [`geometry`] — image ↔ roadway homographies, full 3D projection
//!   recovery from a plane homography plus a vertical vanishing point, and
//!   quadratic lane-curvature correction.
//! * [`timesync`] — cross-camera clock offset estimation from shared
//!   vehicle tracks, per-frame residual timestamp recovery against weighted
//!   spline trajectories, and spline-based annotation refinement.
//! * [`tracking`] — constant-velocity Kalman tracking in roadway
//!   coordinates with IOU association (Hungarian or two-stage
//!   confidence-banded matching), cross-camera detection fusion, and
//!   tracklet stitching.
//! * [`evaluation`] — CLEAR-MOT, HOTA, BEV average precision, cross-camera
//!   displacement/projection error, total-variation smoothness, dimension
//!   error statistics, and time-space diagram export.
//! * [`simulator`] — seeded, fully deterministic scene generation with the
//!   documented camera timing and detection corruption modes, used both as
//!   a test oracle and as a data source for the CLI.
//! * [`formats`] — the csv schemas shared by every stage (labels,
//!   timestamps, transforms, curve files, resampled ground truth).
//!
//! # Conventions
//!
//! Roadway coordinates are in feet: `x` runs along the corridor
//! (eastbound traffic moves toward +x, westbound toward −x), `y` is
//! lateral with the median at `y = 0` (eastbound lanes at `y > 0`,
//! westbound at `y < 0`, lanes 12 ft wide), `z` is height above the road
//! surface. Image coordinates are pixels in 3840×2160 frames. Timestamps
//! are seconds since the epoch; corrected time = raw time + camera offset
//! + per-frame residual.

pub mod evaluation;
pub mod formats;
pub mod geometry;
pub mod simulator;
pub mod timesync;
pub mod tracking;
pub mod types;
pub(crate) mod util;

pub use types::{Box3D, Direction, VehicleClass};
