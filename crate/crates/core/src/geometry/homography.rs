//! Road-plane homography fitting: direct linear transform with isotropic
//! point normalization, followed by a Levenberg-style geometric refinement
//! whenever the linear solution's residual is not already exact.

use super::{Correspondence, GeometryError, ImagePoint, RoadPoint};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

/// Projective map from image pixels to road-plane feet (z = 0).
///
/// Stored exactly as constructed (loaders must round-trip files byte for
/// byte), so the matrix is only normalized by the fitting routine, never by
/// the constructor. The inverse (road plane → image) is cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Homography {
    h: Matrix3<f64>,
    inv: Matrix3<f64>,
}

/// A fitted homography together with its reprojection RMSE in feet.
#[derive(Debug, Clone)]
pub struct HomographyFit {
    pub homography: Homography,
    /// Root-mean-square road-plane distance between mapped image points and
    /// their surveyed roadway positions, in feet.
    pub rmse_ft: f64,
}

impl Homography {
    /// Wraps an image→road matrix, verifying it is finite and invertible.
    pub fn from_matrix(h: Matrix3<f64>) -> Result<Self, GeometryError> {
        if h.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::DegenerateConfiguration);
        }
        let inv = h
            .try_inverse()
            .ok_or(GeometryError::DegenerateConfiguration)?;
        if inv.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::DegenerateConfiguration);
        }
        Ok(Self { h, inv })
    }

    /// The image→road matrix.
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.h
    }

    /// The cached road-plane→image matrix.
    pub fn inverse_matrix(&self) -> &Matrix3<f64> {
        &self.inv
    }

    /// Maps a pixel to the road plane (z = 0). Points on the horizon line
    /// (vanishing projective denominator) map to infinity.
    pub fn image_to_road(&self, p: ImagePoint) -> Result<RoadPoint, GeometryError> {
        let (x, y) = apply_h(&self.h, p.u, p.v)?;
        Ok(RoadPoint::plane(x, y))
    }

    /// Maps a road-plane point into the image.
    pub fn road_plane_to_image(&self, x: f64, y: f64) -> Result<ImagePoint, GeometryError> {
        let (u, v) = apply_h(&self.inv, x, y)?;
        Ok(ImagePoint::new(u, v))
    }
}

/// Applies a 3×3 projective map with a relative near-zero test on the
/// denominator: cancellation nine orders below the summand magnitudes is
/// treated as a point at infinity.
fn apply_h(h: &Matrix3<f64>, a: f64, b: f64) -> Result<(f64, f64), GeometryError> {
    let den = h[(2, 0)] * a + h[(2, 1)] * b + h[(2, 2)];
    let scale = (h[(2, 0)] * a).abs() + (h[(2, 1)] * b).abs() + h[(2, 2)].abs();
    if den.abs() <= 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(GeometryError::AtInfinity);
    }
    Ok((
        (h[(0, 0)] * a + h[(0, 1)] * b + h[(0, 2)]) / den,
        (h[(1, 0)] * a + h[(1, 1)] * b + h[(1, 2)]) / den,
    ))
}

/// Fits the image→road homography from at least four plane correspondences
/// (lane-tick corners and similar surveyed marks), minimizing road-frame
/// reprojection error.
///
/// The direct linear transform runs on isotropically normalized points
/// (centroid at the origin, mean distance √2 on each side); if its
/// geometric residual exceeds 1e-6 ft — i.e. the data are not exactly
/// projective — a damped Gauss-Newton refinement polishes the geometric
/// objective. The result is scaled so h33 = 1 unless that entry is
/// numerically zero, in which case the matrix is unit-Frobenius.
pub fn fit_road_homography(points: &[Correspondence]) -> Result<HomographyFit, GeometryError> {
    if points.len() < 4 {
        return Err(GeometryError::TooFewPoints {
            needed: 4,
            got: points.len(),
        });
    }

    let h = dlt_fit(points)?;
    let mut h = normalize_scale(h);
    let mut rmse = reprojection_rmse(&h, points)?;
    if rmse > 1e-6 {
        let refined = normalize_scale(refine_geometric(h, points));
        let refined_rmse = reprojection_rmse(&refined, points)?;
        // The refinement minimizes exactly the reported objective, so it can
        // only be kept when it actually helps.
        if refined_rmse <= rmse {
            h = refined;
            rmse = refined_rmse;
        }
    }

    Ok(HomographyFit {
        homography: Homography::from_matrix(h)?,
        rmse_ft: rmse,
    })
}

/// Direct linear transform on normalized coordinates. Exposed to the unit
/// tests so the refinement step can be compared against the raw solution.
pub(crate) fn dlt_fit(points: &[Correspondence]) -> Result<Matrix3<f64>, GeometryError> {
    let (t_img, img_n) = normalize_points(points.iter().map(|c| (c.image.u, c.image.v)));
    let (t_road, road_n) = normalize_points(points.iter().map(|c| (c.road.x, c.road.y)));

    let n = points.len();
    // Pad to at least 9 rows: nalgebra's SVD only returns min(rows, 9) right
    // singular vectors, and for exactly 4 points (8 rows) the null vector we
    // need is the 9th. Zero rows leave AᵀA — and thus V — unchanged.
    let mut a = DMatrix::<f64>::zeros((2 * n).max(9), 9);
    for (i, ((u, v), (x, y))) in img_n.iter().zip(road_n.iter()).enumerate() {
        let r0 = 2 * i;
        a[(r0, 0)] = *u;
        a[(r0, 1)] = *v;
        a[(r0, 2)] = 1.0;
        a[(r0, 6)] = -x * u;
        a[(r0, 7)] = -x * v;
        a[(r0, 8)] = -x;
        let r1 = r0 + 1;
        a[(r1, 3)] = *u;
        a[(r1, 4)] = *v;
        a[(r1, 5)] = 1.0;
        a[(r1, 6)] = -y * u;
        a[(r1, 7)] = -y * v;
        a[(r1, 8)] = -y;
    }

    let svd = a.svd(false, true);
    let vt = svd.v_t.as_ref().ok_or(GeometryError::DegenerateConfiguration)?;
    // Smallest singular value by explicit argmin (the ordering of
    // `singular_values` is not part of nalgebra's contract).
    let mut min_idx = 0;
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s < svd.singular_values[min_idx] {
            min_idx = i;
        }
    }
    // Collinear inputs leave a null space of dimension ≥ 2: the second-
    // smallest singular value collapses too and the returned vector is an
    // arbitrary (often still invertible) member of that space, so the rank
    // has to be checked here rather than on the final matrix.
    let mut sorted: Vec<f64> = svd.singular_values.iter().cloned().collect();
    sorted.sort_by(f64::total_cmp);
    if sorted[1] <= 1e-9 * sorted[sorted.len() - 1] {
        return Err(GeometryError::DegenerateConfiguration);
    }
    let hv = vt.row(min_idx);
    let h_norm = Matrix3::new(
        hv[0], hv[1], hv[2], //
        hv[3], hv[4], hv[5], //
        hv[6], hv[7], hv[8],
    );

    // Undo the similarity normalizations: H = T_road⁻¹ · Ĥ · T_img.
    let t_road_inv = t_road
        .try_inverse()
        .ok_or(GeometryError::DegenerateConfiguration)?;
    let h = t_road_inv * h_norm * t_img;
    // Reject rank-deficient fits (e.g. collinear road points).
    Homography::from_matrix(h)?;
    Ok(h)
}

/// Similarity transform moving a point set to centroid 0, mean radius √2,
/// plus the transformed points.
fn normalize_points(points: impl Iterator<Item = (f64, f64)>) -> (Matrix3<f64>, Vec<(f64, f64)>) {
    let pts: Vec<(f64, f64)> = points.collect();
    let n = pts.len() as f64;
    let (cx, cy) = pts
        .iter()
        .fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x, sy + y));
    let (cx, cy) = (cx / n, cy / n);
    let mean_dist = pts
        .iter()
        .map(|(x, y)| ((x - cx).powi(2) + (y - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let s = if mean_dist > 0.0 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    let t = Matrix3::new(
        s, 0.0, -s * cx, //
        0.0, s, -s * cy, //
        0.0, 0.0, 1.0,
    );
    let transformed = pts.iter().map(|(x, y)| (s * (x - cx), s * (y - cy))).collect();
    (t, transformed)
}

/// Scales so h33 = 1 when that entry carries weight; otherwise normalizes
/// to unit Frobenius norm with a deterministic sign.
fn normalize_scale(h: Matrix3<f64>) -> Matrix3<f64> {
    let fro = h.norm();
    if h[(2, 2)].abs() > 1e-8 * fro {
        h / h[(2, 2)]
    } else {
        let h = h / fro;
        // Deterministic sign: make the largest-magnitude entry positive.
        let lead = h.iter().cloned().fold(0.0f64, |acc, v| {
            if v.abs() > acc.abs() {
                v
            } else {
                acc
            }
        });
        if lead < 0.0 {
            -h
        } else {
            h
        }
    }
}

/// RMS road-frame distance between mapped image points and their surveyed
/// positions.
fn reprojection_rmse(h: &Matrix3<f64>, points: &[Correspondence]) -> Result<f64, GeometryError> {
    let mut ss = 0.0;
    for c in points {
        let (x, y) = apply_h(h, c.image.u, c.image.v)?;
        ss += (x - c.road.x).powi(2) + (y - c.road.y).powi(2);
    }
    Ok((ss / points.len() as f64).sqrt())
}

/// Sum of squared road-frame errors; `None` when a point degenerates to
/// infinity under the candidate matrix.
fn geometric_cost(h: &Matrix3<f64>, points: &[Correspondence]) -> Option<f64> {
    let mut ss = 0.0;
    for c in points {
        match apply_h(h, c.image.u, c.image.v) {
            Ok((x, y)) => ss += (x - c.road.x).powi(2) + (y - c.road.y).powi(2),
            Err(_) => return None,
        }
    }
    Some(ss)
}

/// Damped Gauss-Newton (Levenberg) minimization of the geometric road-frame
/// error over all nine entries, renormalized to the unit sphere each step to
/// pin the projective scale gauge.
fn refine_geometric(h0: Matrix3<f64>, points: &[Correspondence]) -> Matrix3<f64> {
    let mut h = h0 / h0.norm();
    let mut cost = match geometric_cost(&h, points) {
        Some(c) => c,
        None => return h0,
    };
    let mut lambda = 1e-3;

    for _ in 0..100 {
        let (jt_j, jt_r) = normal_equations(&h, points);
        if jt_r.amax() < 1e-15 {
            break;
        }

        let mut stepped = false;
        for _ in 0..40 {
            let mut a = jt_j.clone();
            for i in 0..9 {
                a[(i, i)] += lambda * jt_j[(i, i)].max(1e-12);
            }
            let delta = match a.lu().solve(&(-&jt_r)) {
                Some(d) => d,
                None => break,
            };
            let mut h_try = h;
            for (i, d) in delta.iter().enumerate() {
                h_try[(i / 3, i % 3)] += d;
            }
            h_try /= h_try.norm();
            if let Some(c_try) = geometric_cost(&h_try, points) {
                if c_try < cost {
                    h = h_try;
                    cost = c_try;
                    lambda = (lambda / 3.0).max(1e-12);
                    stepped = true;
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if !stepped {
            break;
        }
    }
    h
}

/// Analytic JᵀJ and Jᵀr for the geometric objective at `h`.
fn normal_equations(h: &Matrix3<f64>, points: &[Correspondence]) -> (DMatrix<f64>, DVector<f64>) {
    let mut jt_j = DMatrix::<f64>::zeros(9, 9);
    let mut jt_r = DVector::<f64>::zeros(9);
    for c in points {
        let p = Vector3::new(c.image.u, c.image.v, 1.0);
        let num_x = h.row(0).transpose().dot(&p);
        let num_y = h.row(1).transpose().dot(&p);
        let den = h.row(2).transpose().dot(&p);
        if den.abs() < 1e-300 {
            continue;
        }
        let rx = num_x / den - c.road.x;
        let ry = num_y / den - c.road.y;

        // d(rx)/dh1j = p_j / den, d(rx)/dh3j = -num_x p_j / den²; same for ry
        // with row 2.
        let mut jx = [0.0f64; 9];
        let mut jy = [0.0f64; 9];
        for j in 0..3 {
            jx[j] = p[j] / den;
            jx[6 + j] = -num_x * p[j] / (den * den);
            jy[3 + j] = p[j] / den;
            jy[6 + j] = -num_y * p[j] / (den * den);
        }
        for i in 0..9 {
            jt_r[i] += jx[i] * rx + jy[i] * ry;
            for j in 0..9 {
                jt_j[(i, j)] += jx[i] * jx[j] + jy[i] * jy[j];
            }
        }
    }
    (jt_j, jt_r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// A realistic oblique road→image map (perspective terms included);
    /// image→road truth is its inverse.
    fn synthetic_truth() -> Matrix3<f64> {
        let road_to_img = Matrix3::new(
            3.2, -14.0, 1400.0, //
            0.45, -2.4, 1600.0, //
            0.0001, -0.0022, 1.0,
        );
        road_to_img.try_inverse().unwrap()
    }

    /// Lane-tick style correspondences: ticks every 40 ft on three lane
    /// lines 12 ft apart, mapped exactly through the synthetic truth.
    fn tick_correspondences(h_true: &Matrix3<f64>, n_ticks: usize) -> Vec<Correspondence> {
        let img_from_road = h_true.try_inverse().unwrap();
        let mut out = Vec::new();
        for i in 0..n_ticks {
            let x = 40.0 * i as f64;
            for lane in 0..3 {
                let y = 12.0 * lane as f64;
                let p = img_from_road * Vector3::new(x, y, 1.0);
                out.push(Correspondence {
                    image: ImagePoint::new(p[0] / p[2], p[1] / p[2]),
                    road: RoadPoint::plane(x, y),
                });
            }
        }
        out
    }

    #[test]
    fn identity_fit_from_exact_corners() {
        let pts: Vec<Correspondence> = [(0.0, 0.0), (100.0, 0.0), (100.0, 50.0), (0.0, 50.0), (30.0, 20.0)]
            .iter()
            .map(|&(x, y)| Correspondence {
                image: ImagePoint::new(x, y),
                road: RoadPoint::plane(x, y),
            })
            .collect();
        let fit = fit_road_homography(&pts).unwrap();
        assert!(fit.rmse_ft < 1e-9);
        let m = fit.homography.matrix();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(m[(i, j)], expect, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn exact_ticks_recover_truth_below_nanofoot_rmse() {
        let h_true = synthetic_truth();
        let pts = tick_correspondences(&h_true, 4);
        let fit = fit_road_homography(&pts).unwrap();
        assert!(fit.rmse_ft < 1e-9, "rmse = {}", fit.rmse_ft);
        // The fitted map must agree with truth on fresh points.
        for &(x, y) in &[(17.0, 5.0), (95.0, 23.0), (140.0, 1.0)] {
            let img = h_true.try_inverse().unwrap() * Vector3::new(x, y, 1.0);
            let mapped = fit
                .homography
                .image_to_road(ImagePoint::new(img[0] / img[2], img[1] / img[2]))
                .unwrap();
            assert_relative_eq!(mapped.x, x, epsilon = 1e-8);
            assert_relative_eq!(mapped.y, y, epsilon = 1e-8);
        }
    }

    #[test]
    fn three_points_are_rejected() {
        let pts: Vec<Correspondence> = (0..3)
            .map(|i| Correspondence {
                image: ImagePoint::new(i as f64, 2.0 * i as f64 + 1.0),
                road: RoadPoint::plane(i as f64, i as f64),
            })
            .collect();
        assert!(matches!(
            fit_road_homography(&pts),
            Err(GeometryError::TooFewPoints { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn four_point_minimal_fit_is_exact() {
        // Exactly four correspondences (the minimal configuration): the
        // design matrix has more columns than rows, which exercises the
        // zero-row padding in the null-vector extraction.
        let h_true = synthetic_truth();
        let img_from_road = h_true.try_inverse().unwrap();
        let pts: Vec<Correspondence> = [(0.0, 0.0), (160.0, 0.0), (160.0, 24.0), (0.0, 24.0)]
            .iter()
            .map(|&(x, y)| {
                let p = img_from_road * Vector3::new(x, y, 1.0);
                Correspondence {
                    image: ImagePoint::new(p[0] / p[2], p[1] / p[2]),
                    road: RoadPoint::plane(x, y),
                }
            })
            .collect();
        let fit = fit_road_homography(&pts).unwrap();
        assert!(fit.rmse_ft < 1e-9, "rmse = {}", fit.rmse_ft);
        // A minimal fit interpolates its inputs; check it also matches the
        // truth away from them.
        let probe = img_from_road * Vector3::new(80.0, 12.0, 1.0);
        let mapped = fit
            .homography
            .image_to_road(ImagePoint::new(probe[0] / probe[2], probe[1] / probe[2]))
            .unwrap();
        assert_relative_eq!(mapped.x, 80.0, epsilon = 1e-6);
        assert_relative_eq!(mapped.y, 12.0, epsilon = 1e-6);
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts: Vec<Correspondence> = (0..6)
            .map(|i| Correspondence {
                image: ImagePoint::new(i as f64 * 10.0, i as f64 * 5.0),
                road: RoadPoint::plane(i as f64 * 3.0, 0.0),
            })
            .collect();
        assert!(matches!(
            fit_road_homography(&pts),
            Err(GeometryError::DegenerateConfiguration)
        ));
    }

    #[test]
    fn image_to_road_identity_fixed_point() {
        let h = Homography::from_matrix(Matrix3::identity()).unwrap();
        let p = h.image_to_road(ImagePoint::new(5.0, 7.0)).unwrap();
        assert_eq!((p.x, p.y, p.z), (5.0, 7.0, 0.0));
    }

    #[test]
    fn horizon_points_map_to_infinity() {
        // Horizon line of this map: 0.01·u + 1 = 0, i.e. u = −100.
        let h = Homography::from_matrix(Matrix3::new(
            1.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, //
            0.01, 0.0, 1.0,
        ))
        .unwrap();
        assert_eq!(
            h.image_to_road(ImagePoint::new(-100.0, 3.0)),
            Err(GeometryError::AtInfinity)
        );
        // Just off the horizon is finite.
        assert!(h.image_to_road(ImagePoint::new(-99.0, 3.0)).is_ok());
    }

    #[test]
    fn refinement_never_loses_to_raw_dlt_under_noise() {
        let h_true = synthetic_truth();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let mut pts = tick_correspondences(&h_true, 5);
            for c in &mut pts {
                c.image.u += rng.sample::<f64, _>(rand_distr::StandardNormal);
                c.image.v += rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
            let raw = dlt_fit(&pts).unwrap();
            let raw_rmse = reprojection_rmse(&normalize_scale(raw), &pts).unwrap();
            let fit = fit_road_homography(&pts).unwrap();
            assert!(
                fit.rmse_ft <= raw_rmse + 1e-12,
                "refined {} > dlt {}",
                fit.rmse_ft,
                raw_rmse
            );
        }
    }

    #[test]
    fn round_trip_image_road_image_is_tight() {
        let h_true = synthetic_truth();
        let pts = tick_correspondences(&h_true, 5);
        let fit = fit_road_homography(&pts).unwrap();
        let h = fit.homography;
        for c in &pts {
            let road = h.image_to_road(c.image).unwrap();
            let back = h.road_plane_to_image(road.x, road.y).unwrap();
            assert!(back.dist(&c.image) < 1e-6);
        }
    }
}
