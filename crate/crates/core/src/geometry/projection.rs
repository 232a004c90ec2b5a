//! Full 3×4 roadway→image projection recovered from a plane homography
//! plus the vertical vanishing point.
//!
//! The projection shares its x, y, and translation columns with the
//! inverse homography; only the z column is unknown. Its direction is the
//! homogeneous vanishing point of vertical lines, leaving a single scalar
//! (the p33 scale) that is found by a one-dimensional search minimizing
//! pixel reprojection error over above-plane samples.

use super::{Correspondence, GeometryError, Homography, ImagePoint, RoadPoint};
use crate::util::golden_section;
use nalgebra::{Matrix2, Matrix3x4, Vector2, Vector4};

/// An image-space line observation (two distinct pixel endpoints along a
/// physically vertical edge: pole, sign post, trailer edge).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSegment {
    pub a: ImagePoint,
    pub b: ImagePoint,
}

impl LineSegment {
    pub fn new(a: ImagePoint, b: ImagePoint) -> Self {
        Self { a, b }
    }
}

/// Projective map from roadway (x, y, z, 1) to image pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraProjection {
    p: Matrix3x4<f64>,
}

impl CameraProjection {
    /// Wraps a roadway→image matrix, verifying finiteness.
    pub fn from_matrix(p: Matrix3x4<f64>) -> Result<Self, GeometryError> {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::DegenerateConfiguration);
        }
        Ok(Self { p })
    }

    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.p
    }

    /// Projects a roadway point to pixels. A vanishing projective
    /// denominator (point on the camera's principal plane) is an error.
    pub fn project(&self, r: &RoadPoint) -> Result<ImagePoint, GeometryError> {
        let q = self.p * Vector4::new(r.x, r.y, r.z, 1.0);
        if q[2].abs() <= 1e-9 * self.depth_scale(r) {
            return Err(GeometryError::AtInfinity);
        }
        Ok(ImagePoint::new(q[0] / q[2], q[1] / q[2]))
    }

    /// Signed projective depth of a point — the raw denominator. Points on
    /// opposite sides of the camera's principal plane have opposite signs.
    pub(crate) fn depth(&self, r: &RoadPoint) -> f64 {
        self.p[(2, 0)] * r.x + self.p[(2, 1)] * r.y + self.p[(2, 2)] * r.z + self.p[(2, 3)]
    }

    /// Magnitude scale used for the relative near-zero denominator test.
    pub(crate) fn depth_scale(&self, r: &RoadPoint) -> f64 {
        ((self.p[(2, 0)] * r.x).abs()
            + (self.p[(2, 1)] * r.y).abs()
            + (self.p[(2, 2)] * r.z).abs()
            + self.p[(2, 3)].abs())
        .max(f64::MIN_POSITIVE)
    }
}

/// Least-squares intersection of image-space vertical line observations:
/// the z-axis vanishing point. Requires at least two segments; fails with
/// `ParallelLines` when the normal system is rank deficient.
pub fn intersect_vertical_lines(lines: &[LineSegment]) -> Result<ImagePoint, GeometryError> {
    if lines.len() < 2 {
        return Err(GeometryError::TooFewPoints {
            needed: 2,
            got: lines.len(),
        });
    }

    // Minimize Σ (nᵢ·p − nᵢ·aᵢ)² over p, with nᵢ the unit normal of line i.
    let mut m = Matrix2::<f64>::zeros();
    let mut rhs = Vector2::<f64>::zeros();
    for seg in lines {
        let dx = seg.b.u - seg.a.u;
        let dy = seg.b.v - seg.a.v;
        let len = (dx * dx + dy * dy).sqrt();
        if len < 1e-12 {
            return Err(GeometryError::DegenerateConfiguration);
        }
        let n = Vector2::new(-dy / len, dx / len);
        let d = n[0] * seg.a.u + n[1] * seg.a.v;
        m += n * n.transpose();
        rhs += n * d;
    }

    // All normals (near-)parallel leaves m rank 1.
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let tr = m[(0, 0)] + m[(1, 1)];
    if det <= 1e-12 * (tr * tr).max(f64::MIN_POSITIVE) {
        return Err(GeometryError::ParallelLines);
    }
    let p = m.try_inverse().ok_or(GeometryError::ParallelLines)? * rhs;
    Ok(ImagePoint::new(p[0], p[1]))
}

/// Recovers the full projection from a fitted plane homography, the
/// vertical vanishing point, and correspondence samples that include at
/// least one above-plane point (z > 0).
///
/// Columns 1, 2, and 4 are copied from the inverse homography; column 3 is
/// `s · (vp.u, vp.v, 1)` with the scalar `s` minimizing summed squared
/// pixel reprojection error. The scalar is searched by golden section over
/// a log-magnitude bracket `[1e-6, 1e6]` (both signs, relative tolerance
/// 1e-10), the plane columns pinning every other degree of freedom.
pub fn fit_projection(
    h: &Homography,
    vanishing_point_z: ImagePoint,
    samples: &[Correspondence],
) -> Result<CameraProjection, GeometryError> {
    if !samples.iter().any(|c| c.road.z > 0.0) {
        return Err(GeometryError::NoAbovePlaneSamples);
    }

    let hinv = h.inverse_matrix();
    let build = |s: f64| -> Matrix3x4<f64> {
        Matrix3x4::new(
            hinv[(0, 0)], hinv[(0, 1)], s * vanishing_point_z.u, hinv[(0, 2)], //
            hinv[(1, 0)], hinv[(1, 1)], s * vanishing_point_z.v, hinv[(1, 2)], //
            hinv[(2, 0)], hinv[(2, 1)], s, hinv[(2, 2)],
        )
    };

    let cost = |s: f64| -> f64 {
        let p = CameraProjection { p: build(s) };
        let mut ss = 0.0;
        for c in samples {
            match p.project(&c.road) {
                Ok(img) => {
                    ss += (img.u - c.image.u).powi(2) + (img.v - c.image.v).powi(2);
                }
                // Steer the search away from scales that push samples onto
                // the principal plane.
                Err(_) => ss += 1e12,
            }
        }
        ss
    };

    // Log-magnitude bracket; the sign of p33 is not known a priori, so both
    // half-lines are searched and the better minimum kept.
    let (lo, hi) = ((1e-6f64).ln(), (1e6f64).ln());
    let tol = 1e-10 * (hi - lo);
    let mut best: Option<(f64, f64)> = None;
    for sign in [1.0, -1.0] {
        let (lam, f) = golden_section(|lam: f64| cost(sign * lam.exp()), lo, hi, tol, 256);
        let s = sign * lam.exp();
        if best.is_none_or(|(_, fb)| f < fb) {
            best = Some((s, f));
        }
    }
    let (s, _) = best.unwrap();
    CameraProjection::from_matrix(build(s))
}
