//! Calibration artifacts: the per-(camera, direction) transform files and
//! the correspondence inputs they are fitted from.
//!
//! * `*_homography.csv` — two headerless lines: the nine image→road
//!   homography parameters (h11…h33, row-major), then the twelve road→image
//!   projection parameters (p11…p34, row-major).
//! * `*_curve.csv` — the three lateral-curvature coefficients in the first
//!   three columns of the first row, highest degree first (c2, c1, c0).
//! * `*_points.csv` — correspondence points, one per row: pixel (u, v) and
//!   roadway (x, y, z).
//! * `*_verticals.csv` — image-space segments along physically vertical
//!   edges, one per row: (u1, v1, u2, v2).
//!
//! Everything here is precision-critical calibration data, so all values
//! are written in shortest round-trip form: loading a written file
//! reproduces each number bit for bit.

use super::{expect_columns, expect_header, field, fmt_exact, split_record, FormatError};
use crate::geometry::{
    CameraProjection, Correspondence, CurveOffset, Homography, ImagePoint, LineSegment, RoadPoint,
};
use nalgebra::{Matrix3, Matrix3x4};
use std::fmt::Write as _;

pub(crate) const POINTS_HEADER: &str = "u,v,x,y,z";
pub(crate) const VERTICALS_HEADER: &str = "u1,v1,u2,v2";

fn join_exact<'a>(vals: impl IntoIterator<Item = &'a f64>) -> String {
    vals.into_iter()
        .map(|v| fmt_exact(*v))
        .collect::<Vec<_>>()
        .join(",")
}

/// Serializes the two-line homography file: H row-major, then P row-major.
pub fn write_homography_file(h: &Homography, p: &CameraProjection) -> String {
    let hm = h.matrix();
    let pm = p.matrix();
    let h_vals: Vec<f64> = (0..3).flat_map(|r| (0..3).map(move |c| hm[(r, c)])).collect();
    let p_vals: Vec<f64> = (0..3).flat_map(|r| (0..4).map(move |c| pm[(r, c)])).collect();
    format!("{}\n{}\n", join_exact(&h_vals), join_exact(&p_vals))
}

fn parse_reals(line: &str, n: usize, lineno: usize) -> Result<Vec<f64>, FormatError> {
    let f = split_record(line);
    expect_columns(&f, n, lineno)?;
    f.iter()
        .map(|s| field(s, lineno, "parameter"))
        .collect()
}

/// Parses the two-line homography file back into the transform pair.
pub fn read_homography_file(text: &str) -> Result<(Homography, CameraProjection), FormatError> {
    let mut lines = text.lines();
    let l1 = lines
        .next()
        .ok_or_else(|| FormatError::parse(1, "empty file: expected 9 homography parameters"))?;
    let hv = parse_reals(l1, 9, 1)?;
    let l2 = lines
        .next()
        .ok_or_else(|| FormatError::parse(2, "missing second line: expected 12 projection parameters"))?;
    let pv = parse_reals(l2, 12, 2)?;
    let h = Homography::from_matrix(Matrix3::from_row_slice(&hv))
        .map_err(|e| FormatError::parse(1, format!("bad homography: {e}")))?;
    let p = CameraProjection::from_matrix(Matrix3x4::from_row_slice(&pv))
        .map_err(|e| FormatError::parse(2, format!("bad projection: {e}")))?;
    Ok((h, p))
}

/// Serializes the curvature coefficients (first row, highest degree first).
pub fn write_curve_file(c: &CurveOffset) -> String {
    format!("{}\n", join_exact(&[c.c2, c.c1, c.c0]))
}

/// Parses a curve file: the first three columns of the first row; extra
/// columns are tolerated and ignored.
pub fn read_curve_file(text: &str) -> Result<CurveOffset, FormatError> {
    let l1 = text
        .lines()
        .next()
        .ok_or_else(|| FormatError::parse(1, "empty file: expected curvature coefficients"))?;
    let f = split_record(l1);
    if f.len() < 3 {
        return Err(FormatError::parse(
            1,
            format!("expected at least 3 columns, got {}", f.len()),
        ));
    }
    Ok(CurveOffset {
        c2: field(f[0], 1, "c2")?,
        c1: field(f[1], 1, "c1")?,
        c0: field(f[2], 1, "c0")?,
    })
}

/// Serializes correspondence points (header `u,v,x,y,z`).
pub fn write_points_file(points: &[Correspondence]) -> String {
    let mut out = String::with_capacity(48 * (points.len() + 1));
    out.push_str(POINTS_HEADER);
    out.push('\n');
    for c in points {
        let _ = writeln!(
            out,
            "{}",
            join_exact(&[c.image.u, c.image.v, c.road.x, c.road.y, c.road.z])
        );
    }
    out
}

/// Parses a correspondence points file.
pub fn read_points_file(text: &str) -> Result<Vec<Correspondence>, FormatError> {
    let mut lines = text.lines().enumerate();
    expect_header(lines.next().map(|(_, l)| l), POINTS_HEADER)?;
    let mut points = Vec::new();
    for (i, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let f = split_record(raw);
        expect_columns(&f, 5, i + 1)?;
        points.push(Correspondence {
            image: ImagePoint::new(field(f[0], i + 1, "u")?, field(f[1], i + 1, "v")?),
            road: RoadPoint::new(
                field(f[2], i + 1, "x")?,
                field(f[3], i + 1, "y")?,
                field(f[4], i + 1, "z")?,
            ),
        });
    }
    Ok(points)
}

/// Serializes vertical-edge segments (header `u1,v1,u2,v2`).
pub fn write_verticals_file(segments: &[LineSegment]) -> String {
    let mut out = String::with_capacity(40 * (segments.len() + 1));
    out.push_str(VERTICALS_HEADER);
    out.push('\n');
    for s in segments {
        let _ = writeln!(out, "{}", join_exact(&[s.a.u, s.a.v, s.b.u, s.b.v]));
    }
    out
}

/// Parses a verticals file.
pub fn read_verticals_file(text: &str) -> Result<Vec<LineSegment>, FormatError> {
    let mut lines = text.lines().enumerate();
    expect_header(lines.next().map(|(_, l)| l), VERTICALS_HEADER)?;
    let mut segs = Vec::new();
    for (i, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let f = split_record(raw);
        expect_columns(&f, 4, i + 1)?;
        segs.push(LineSegment::new(
            ImagePoint::new(field(f[0], i + 1, "u1")?, field(f[1], i + 1, "v1")?),
            ImagePoint::new(field(f[2], i + 1, "u2")?, field(f[3], i + 1, "v2")?),
        ));
    }
    Ok(segs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn awkward_homography() -> Homography {
        // Deliberately non-round entries so exact round-tripping is load
        // bearing.
        let m = Matrix3::new(
            0.1, 0.2, 3.0 / 7.0, //
            -0.05, 1.0 / 3.0, 10.0, //
            1e-4, -2e-5, 1.0,
        );
        Homography::from_matrix(m).unwrap()
    }

    fn awkward_projection() -> CameraProjection {
        let m = Matrix3x4::new(
            2600.0 / 7.0, 0.1, 1920.5, 17.0, //
            0.0, -2600.0, 1080.25, 1.0 / 11.0, //
            1e-3, 2e-4, -5e-4, 1.0,
        );
        CameraProjection::from_matrix(m).unwrap()
    }

    #[test]
    fn homography_file_round_trips_bit_for_bit() {
        let (h, p) = (awkward_homography(), awkward_projection());
        let text = write_homography_file(&h, &p);
        let (h2, p2) = read_homography_file(&text).unwrap();
        assert_eq!(h2.matrix(), h.matrix());
        assert_eq!(p2.matrix(), p.matrix());
        assert_eq!(write_homography_file(&h2, &p2), text);
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 9);
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 12);
    }

    #[test]
    fn curve_file_round_trips_and_tolerates_extra_columns() {
        let c = CurveOffset {
            c2: 1.0 / 3.0e6,
            c1: -0.02,
            c0: 4.75,
        };
        let text = write_curve_file(&c);
        assert_eq!(read_curve_file(&text).unwrap(), c);
        assert_eq!(write_curve_file(&read_curve_file(&text).unwrap()), text);
        let padded = format!("{},99,99\n", text.trim_end());
        assert_eq!(read_curve_file(&padded).unwrap(), c);
    }

    #[test]
    fn points_and_verticals_round_trip() {
        let pts = vec![
            Correspondence {
                image: ImagePoint::new(100.125, 2000.0 / 3.0),
                road: RoadPoint::new(40.0, -6.0, 0.0),
            },
            Correspondence {
                image: ImagePoint::new(3839.0, 0.5),
                road: RoadPoint::new(1960.0, 18.0, 14.5),
            },
        ];
        let text = write_points_file(&pts);
        let back = read_points_file(&text).unwrap();
        assert_eq!(back, pts);
        assert_eq!(write_points_file(&back), text);

        let segs = vec![LineSegment::new(
            ImagePoint::new(10.0, 20.0),
            ImagePoint::new(10.0 + 1e-13, 500.0),
        )];
        let vt = write_verticals_file(&segs);
        assert_eq!(read_verticals_file(&vt).unwrap(), segs);
    }

    #[test]
    fn degenerate_matrices_are_rejected_with_context() {
        let zeros = format!("{}\n{}\n", ["0"; 9].join(","), ["0"; 12].join(","));
        match read_homography_file(&zeros) {
            Err(FormatError::Parse { line: 1, message }) => {
                assert!(message.contains("homography"), "{message}");
            }
            other => panic!("expected degenerate error, got {other:?}"),
        }
        assert!(matches!(
            read_homography_file("1,2,3\n"),
            Err(FormatError::Parse { line: 1, .. })
        ));
        assert!(matches!(read_curve_file(""), Err(FormatError::Parse { .. })));
    }
}
