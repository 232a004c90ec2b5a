//! The per-frame timing table (`*_timestamps.csv`): raw camera stamps next
//! to their corrected values, one row per emitted frame.
//!
//! Raw stamps are written with exactly two decimals — the cameras quantize
//! to 0.01 s, so two decimals are lossless for well-formed data — while
//! corrected stamps carry full round-trip precision (sub-quantization
//! corrections are the entire point of the column).

use super::{expect_columns, expect_header, field, fmt_exact, fmt_raw_ts, split_record, FormatError};
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub(crate) const TIMESTAMPS_HEADER: &str = "frame_index,camera,timestamp,corrected_timestamp";

/// One frame's timing record.
#[derive(Debug, Clone, PartialEq)]
pub struct StampRow {
    pub frame_index: u32,
    pub camera: String,
    /// Stamp as reported by the camera (0.01 s quantized).
    pub t_raw: f64,
    /// Stamp after offset and residual correction (equals `t_raw` in a
    /// freshly simulated, not-yet-synced file only if no defects were
    /// injected).
    pub t_corrected: f64,
}

/// Serializes stamp rows in the given order.
pub fn write_timestamps(rows: &[StampRow]) -> String {
    let mut out = String::with_capacity(40 * (rows.len() + 1));
    out.push_str(TIMESTAMPS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.frame_index,
            r.camera,
            fmt_raw_ts(r.t_raw),
            fmt_exact(r.t_corrected),
        );
    }
    out
}

/// Parses a timestamps file (header required).
pub fn read_timestamps(text: &str) -> Result<Vec<StampRow>, FormatError> {
    let mut lines = text.lines().enumerate();
    expect_header(lines.next().map(|(_, l)| l), TIMESTAMPS_HEADER)?;
    let mut rows = Vec::new();
    for (i, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let f = split_record(raw);
        expect_columns(&f, 4, i + 1)?;
        rows.push(StampRow {
            frame_index: field(f[0], i + 1, "frame_index")?,
            camera: f[1].to_string(),
            t_raw: field(f[2], i + 1, "timestamp")?,
            t_corrected: field(f[3], i + 1, "corrected_timestamp")?,
        });
    }
    Ok(rows)
}

/// Indexes stamp rows by (camera, frame index) for joining against label
/// rows. Later duplicates win (doubled frames share a stamp anyway).
pub fn stamp_map(rows: &[StampRow]) -> BTreeMap<(String, u32), (f64, f64)> {
    rows.iter()
        .map(|r| ((r.camera.clone(), r.frame_index), (r.t_raw, r.t_corrected)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<StampRow> {
        vec![
            StampRow {
                frame_index: 0,
                camera: "p1c1".to_string(),
                t_raw: 0.03,
                t_corrected: 1.0 / 30.0,
            },
            StampRow {
                frame_index: 1,
                camera: "p1c1".to_string(),
                t_raw: 0.06,
                t_corrected: 0.0666666666666666,
            },
            StampRow {
                frame_index: 0,
                camera: "p2c3".to_string(),
                t_raw: 1599999999.98,
                t_corrected: 1600000000.08123,
            },
        ]
    }

    #[test]
    fn timestamps_survive_a_write_read_write_cycle() {
        let text = write_timestamps(&sample());
        let back = read_timestamps(&text).unwrap();
        assert_eq!(write_timestamps(&back), text);
        // Corrected stamps are bit-exact; raw stamps exact at 2 decimals.
        assert_eq!(back[0].t_corrected, 1.0 / 30.0);
        assert_eq!(back[2].t_corrected, 1600000000.08123);
        assert!(text.contains("1599999999.98,"));
    }

    #[test]
    fn raw_column_always_shows_two_decimals() {
        let text = write_timestamps(&[StampRow {
            frame_index: 7,
            camera: "c".to_string(),
            t_raw: 12.0,
            t_corrected: 12.0,
        }]);
        assert!(text.lines().nth(1).unwrap().starts_with("7,c,12.00,12"));
    }

    #[test]
    fn stamp_map_joins_on_camera_and_frame() {
        let m = stamp_map(&sample());
        assert_eq!(m[&("p1c1".to_string(), 1)].0, 0.06);
        assert_eq!(m.len(), 3);
    }

    #[test]
    fn bad_rows_name_their_line() {
        let text = format!("{TIMESTAMPS_HEADER}\n0,cam,0.03,x\n");
        assert!(matches!(
            read_timestamps(&text),
            Err(FormatError::Parse { line: 2, .. })
        ));
    }
}
