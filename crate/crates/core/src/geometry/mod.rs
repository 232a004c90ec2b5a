//! Image ↔ roadway geometry: plane homographies, full 3D camera
//! projections, and quadratic lane-curvature correction.
//!
//! Every camera–direction pair gets its own transform set. The homography
//! `H` maps image pixels to road-plane feet (z = 0); its inverse maps road
//! plane points back to pixels. The 3×4 projection `P` maps arbitrary
//! roadway points (x, y, z) to pixels and shares its first, second, and
//! fourth columns with `H⁻¹` — only the z column is new, recovered from
//! the vertical vanishing point plus at least one above-plane sample.
//!
//! # Box corner order
//!
//! [`road_to_image`] and [`box_corners`] emit the eight corners of a
//! [`Box3D`] in this fixed order (bottom face first, then the top face in
//! the same winding):
//!
//! 1. rear-bottom-left   2. rear-bottom-right
//! 3. front-bottom-right 4. front-bottom-left
//! 5. rear-top-left      6. rear-top-right
//! 7. front-top-right    8. front-top-left
//!
//! "Front" is the face toward the direction of travel and "left" is the
//! driver's left: +y for eastbound traffic, −y for westbound.

mod curve;
mod homography;
mod projection;

pub use curve::{apply_curvature, fit_curve_offset, CurveDir, CurveOffset};
pub use homography::{fit_road_homography, Homography, HomographyFit};
pub use projection::{fit_projection, intersect_vertical_lines, CameraProjection, LineSegment};

use crate::types::{Box3D, Direction};
use thiserror::Error;

/// Pixel position in a 3840×2160 frame (finite values; may lie outside the
/// frame bounds for points seen by other cameras).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
}

impl ImagePoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn dist(&self, other: &ImagePoint) -> f64 {
        ((self.u - other.u).powi(2) + (self.v - other.v).powi(2)).sqrt()
    }
}

/// Roadway-frame position in feet (x longitudinal, y lateral, z height).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl RoadPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Road-plane point (z = 0).
    pub fn plane(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }
}

/// A matched image/roadway point pair used for transform fitting.
/// Plane fits require `road.z == 0`; projection fitting also consumes
/// above-plane samples (z > 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub image: ImagePoint,
    pub road: RoadPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate point configuration (collinear or rank-deficient)")]
    DegenerateConfiguration,
    #[error("point maps to infinity (projective denominator vanishes)")]
    AtInfinity,
    #[error("vertical lines are parallel; no finite intersection")]
    ParallelLines,
    #[error("no above-plane samples (need at least one with z > 0)")]
    NoAbovePlaneSamples,
    #[error("all x values coincide; quadratic fit is underdetermined")]
    DegenerateX,
}

/// Roadway corners of a vehicle box in the documented order (see module
/// docs): bottom face rear-left, rear-right, front-right, front-left, then
/// the top face in the same winding.
pub fn box_corners(b: &Box3D) -> [RoadPoint; 8] {
    // Driver's left: +y eastbound, −y westbound.
    let half_w = b.width / 2.0;
    let (left_y, right_y) = match b.direction {
        Direction::Eb => (b.y + half_w, b.y - half_w),
        Direction::Wb => (b.y - half_w, b.y + half_w),
    };
    let rear_x = b.x;
    let front_x = b.front_x();
    let bottom = [
        (rear_x, left_y),
        (rear_x, right_y),
        (front_x, right_y),
        (front_x, left_y),
    ];
    let mut corners = [RoadPoint::plane(0.0, 0.0); 8];
    for (i, &(x, y)) in bottom.iter().enumerate() {
        corners[i] = RoadPoint::new(x, y, 0.0);
        corners[i + 4] = RoadPoint::new(x, y, b.height);
    }
    corners
}

/// Projects all eight corners of a roadway box into the image, in the
/// documented corner order. Fails with `AtInfinity` when any corner's
/// projective denominator vanishes or when the corners straddle the
/// camera's principal plane (the denominator crosses zero inside the box).
pub fn road_to_image(
    proj: &CameraProjection,
    b: &Box3D,
) -> Result<[ImagePoint; 8], GeometryError> {
    let corners = box_corners(b);
    let mut sign = 0.0f64;
    for c in &corners {
        let depth = proj.depth(c);
        if depth.abs() <= 1e-9 * proj.depth_scale(c) {
            return Err(GeometryError::AtInfinity);
        }
        if sign == 0.0 {
            sign = depth.signum();
        } else if depth.signum() != sign {
            return Err(GeometryError::AtInfinity);
        }
    }
    let mut out = [ImagePoint::new(0.0, 0.0); 8];
    for (i, c) in corners.iter().enumerate() {
        out[i] = proj.project(c)?;
    }
    Ok(out)
}

/// Pixels of image motion produced by a one-foot longitudinal (x) shift at
/// a road-plane point — the annotation weight used throughout time sync.
/// Measured as a 1-ft central difference through the road→image map.
pub fn pixels_per_foot_x(h: &Homography, x: f64, y: f64) -> Result<f64, GeometryError> {
    let a = h.road_plane_to_image(x + 0.5, y)?;
    let b = h.road_plane_to_image(x - 0.5, y)?;
    Ok(a.dist(&b))
}
