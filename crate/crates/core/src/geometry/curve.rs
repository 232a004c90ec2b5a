//! Quadratic lane-curvature correction.
//!
//! Camera homographies are fit on locally straight lane geometry, so on a
//! curved corridor the recovered lateral position drifts with x. A single
//! quadratic offset per camera–direction pair, fit along a solid lane
//! line, straightens the frame: the forward correction subtracts the
//! offset from y, the inverse adds it back. Only y is ever touched.

use super::{GeometryError, RoadPoint};
use nalgebra::{DMatrix, DVector};

/// Quadratic lateral offset `f(x) = c2·x² + c1·x + c0` in feet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveOffset {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl CurveOffset {
    /// The identity correction.
    pub fn zero() -> Self {
        Self { c2: 0.0, c1: 0.0, c0: 0.0 }
    }

    /// Lateral offset at longitudinal position x.
    pub fn eval(&self, x: f64) -> f64 {
        (self.c2 * x + self.c1) * x + self.c0
    }
}

/// Direction of a curvature application.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveDir {
    /// Subtract f(x) from y (raw → corrected).
    Forward,
    /// Add f(x) to y (corrected → raw).
    Inverse,
}

/// Applies the curvature correction to a single roadway point; x and z are
/// untouched. Forward followed by inverse restores the input (the same
/// f(x) is subtracted and re-added).
pub fn apply_curvature(curve: &CurveOffset, p: RoadPoint, dir: CurveDir) -> RoadPoint {
    let f = curve.eval(p.x);
    let y = match dir {
        CurveDir::Forward => p.y - f,
        CurveDir::Inverse => p.y + f,
    };
    RoadPoint::new(p.x, y, p.z)
}

/// Least-squares quadratic fit of lateral offsets along a lane line:
/// points are (x, y) samples of the line in the uncorrected frame.
/// Requires at least three points spanning at least three distinct x
/// values. The fit is performed around the x centroid for conditioning and
/// the coefficients expanded back to the raw axis.
pub fn fit_curve_offset(points: &[(f64, f64)]) -> Result<CurveOffset, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(|a, b| a.total_cmp(b));
    xs.dedup();
    if xs.len() < 3 {
        return Err(GeometryError::DegenerateX);
    }

    let mx = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    let mut a = DMatrix::<f64>::zeros(points.len(), 3);
    let mut b = DVector::<f64>::zeros(points.len());
    for (i, &(x, y)) in points.iter().enumerate() {
        let xc = x - mx;
        a[(i, 0)] = xc * xc;
        a[(i, 1)] = xc;
        a[(i, 2)] = 1.0;
        b[i] = y;
    }
    let svd = a.svd(true, true);
    let sol = svd
        .solve(&b, 1e-12)
        .map_err(|_| GeometryError::DegenerateConfiguration)?;
    let (a2, a1, a0) = (sol[0], sol[1], sol[2]);

    // Expand a2(x−m)² + a1(x−m) + a0 back to powers of x.
    Ok(CurveOffset {
        c2: a2,
        c1: a1 - 2.0 * a2 * mx,
        c0: a0 - a1 * mx + a2 * mx * mx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_line_fits_constant_offset() {
        let pts: Vec<(f64, f64)> = (0..8).map(|i| (40.0 * i as f64, 2.0)).collect();
        let c = fit_curve_offset(&pts).unwrap();
        assert_relative_eq!(c.c2, 0.0, epsilon = 1e-9);
        assert_relative_eq!(c.c1, 0.0, epsilon = 1e-9);
        assert_relative_eq!(c.c0, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn exact_quadratic_recovered_coefficient_wise() {
        let truth = CurveOffset { c2: 3e-6, c1: -0.01, c0: 4.5 };
        let pts: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let x = 100.0 * i as f64;
                (x, truth.eval(x))
            })
            .collect();
        let c = fit_curve_offset(&pts).unwrap();
        assert_relative_eq!(c.c2, truth.c2, epsilon = 1e-9);
        assert_relative_eq!(c.c1, truth.c1, epsilon = 1e-9);
        assert_relative_eq!(c.c0, truth.c0, epsilon = 1e-9);
    }

    #[test]
    fn two_points_are_rejected() {
        assert!(matches!(
            fit_curve_offset(&[(0.0, 1.0), (1.0, 2.0)]),
            Err(GeometryError::TooFewPoints { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn coincident_x_values_are_degenerate() {
        let pts = [(5.0, 1.0), (5.0, 2.0), (5.0, 3.0), (10.0, 1.0)];
        assert_eq!(fit_curve_offset(&pts), Err(GeometryError::DegenerateX));
    }

    #[test]
    fn forward_subtracts_the_offset() {
        // f(10) = 3 + 0.1·10 + 0.001·100 = 4.1, so y = 5 → 0.9.
        let c = CurveOffset { c2: 0.001, c1: 0.1, c0: 3.0 };
        let p = apply_curvature(&c, RoadPoint::plane(10.0, 5.0), CurveDir::Forward);
        assert_relative_eq!(p.y, 0.9, epsilon = 1e-12);
        assert_eq!(p.x, 10.0);
    }

    #[test]
    fn zero_curve_is_identity() {
        let p = RoadPoint::new(123.0, -7.5, 3.0);
        let q = apply_curvature(&CurveOffset::zero(), p, CurveDir::Forward);
        assert_eq!(p, q);
    }

    proptest! {
        // Round trip at roadway scales: the same f(x) is subtracted then
        // re-added, so x passes through untouched and y returns to within
        // one rounding step of each operation. Bit-exactness does NOT hold
        // in general — when |y − f| lands in a higher binade than |y|, the
        // re-addition can round to an adjacent float (observed at e.g.
        // y ≈ −4.6, f ≈ −24.1), so the honest invariant is the ulp bound.
        #[test]
        fn forward_then_inverse_restores_y_within_rounding(
            x in 0.0f64..2000.0,
            y in -60.0f64..60.0,
            c2 in -1e-5f64..1e-5,
            c1 in -0.05f64..0.05,
            c0 in -5.0f64..5.0,
        ) {
            let c = CurveOffset { c2, c1, c0 };
            let p = RoadPoint::plane(x, y);
            let fwd = apply_curvature(&c, p, CurveDir::Forward);
            let back = apply_curvature(&c, fwd, CurveDir::Inverse);
            prop_assert_eq!(back.x.to_bits(), p.x.to_bits());
            let scale = p.y.abs().max(c.eval(p.x).abs());
            prop_assert!((back.y - p.y).abs() <= 2.0 * f64::EPSILON * scale,
                "round trip moved y by {:e}", (back.y - p.y).abs());
        }

        // When the subtraction y − f is exact (Sterbenz: f and y share a sign
        // and f/2 ≤ y ≤ 2f up to symmetry), adding f back is the inverse of
        // an exact operation and the round trip is bit-identical.
        #[test]
        fn sterbenz_regime_round_trips_bit_exactly(
            y in 10.0f64..20.0,
            f in 10.0f64..20.0,
        ) {
            let c = CurveOffset { c2: 0.0, c1: 0.0, c0: f };
            let p = RoadPoint::plane(100.0, y);
            let fwd = apply_curvature(&c, p, CurveDir::Forward);
            let back = apply_curvature(&c, fwd, CurveDir::Inverse);
            prop_assert_eq!(back.y.to_bits(), p.y.to_bits());
        }
    }
}
