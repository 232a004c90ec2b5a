//! File formats: the csv schemas, transform files, key-value configs, and
//! report documents the command-line tools exchange.
//!
//! Dialect rules, applied uniformly:
//!
//! * Comma-separated, one record per line, no quoting — no field may
//!   contain a comma (ids and camera names are word-like by construction).
//! * Columnar files carry a header row naming every column; the two
//!   positional transform files (homography: two lines of parameters;
//!   curve: coefficients in the first row) are headerless.
//! * Floating-point values are written with six significant digits
//!   ([`fmt_g6`]), with two exceptions: raw camera timestamps are written
//!   with exactly two decimals (matching their 0.01 s quantization), and
//!   precision-critical values — corrected/true timestamps, transform
//!   parameters, calibration correspondences — are written in shortest
//!   round-trip form ([`fmt_exact`]) so loading them back reproduces the
//!   bit-identical number.
//!
//! Every writer/reader pair is a fixpoint: parsing an emitted file and
//! re-emitting it reproduces the bytes, and the parsed value re-parses to
//! itself. The readers report failures with 1-based line numbers.

use std::str::FromStr;
use thiserror::Error;

mod config;
mod labels;
mod report;
mod timestamps;
mod transforms;

pub use config::KeyValues;
pub use labels::{
    labels_to_series, read_labels, read_resampled, series_to_labels, tracklets_to_labels,
    write_labels, write_resampled, LabelRow, ResampledRow,
};
pub use report::{
    read_report_csv, read_report_json, read_timespace_csv, report_to_json, write_report_csv,
    write_timespace_csv, ReportRow,
};
pub use timestamps::{read_timestamps, stamp_map, write_timestamps, StampRow};
pub use transforms::{
    read_curve_file, read_homography_file, read_points_file, read_verticals_file,
    write_curve_file, write_homography_file, write_points_file, write_verticals_file,
};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// Malformed content; `line` is 1-based within the offending file.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing required key '{0}'")]
    MissingKey(String),
}

impl FormatError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        FormatError::Parse {
            line,
            message: message.into(),
        }
    }
}

/// Formats a float with six significant digits, shortest form: plain
/// decimal for magnitudes in [1e−4, 1e6), exponent notation outside, and
/// trailing zeros trimmed. Parsing the result and re-formatting it is a
/// fixpoint.
pub fn fmt_g6(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        // Never produced by well-formed writers; kept total for safety.
        return format!("{v}");
    }
    // "{:.5e}" yields "d.dddddEeexp" with a correctly rounded mantissa
    // (carrying into the exponent when the mantissa rounds to 10).
    let sci = format!("{:.5e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("std exponent form");
    let exp: i32 = exp.parse().expect("std exponent form");
    if !(-4..6).contains(&exp) {
        let trimmed = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{trimmed}e{exp}");
    }

    // Plain decimal: shift the rounded 6-digit mantissa by the exponent.
    let neg = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    debug_assert_eq!(digits.len(), 6);
    let point = exp + 1; // digits before the decimal point
    let mut s = String::new();
    if neg {
        s.push('-');
    }
    if point <= 0 {
        s.push_str("0.");
        s.extend(std::iter::repeat_n('0', (-point) as usize));
        s.push_str(&digits);
    } else {
        s.push_str(&digits[..point as usize]);
        s.push('.');
        s.push_str(&digits[point as usize..]);
    }
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Shortest string that parses back to the bit-identical f64 (std's
/// `Display` guarantee). Used for precision-critical columns.
pub fn fmt_exact(v: f64) -> String {
    format!("{v}")
}

/// Raw camera timestamps: exactly two decimals, matching the cameras' own
/// 0.01 s stamp quantization.
pub fn fmt_raw_ts(v: f64) -> String {
    format!("{v:.2}")
}

/// Splits one csv record; no quoting in this dialect, so this is a plain
/// comma split with surrounding-whitespace trim.
pub(crate) fn split_record(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

/// Parses one field, naming the column and line on failure.
pub(crate) fn field<T: FromStr>(s: &str, line: usize, column: &str) -> Result<T, FormatError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| {
        FormatError::parse(line, format!("column '{column}': cannot parse {s:?}: {e}"))
    })
}

/// Checks a record's arity against the header it claims to follow.
pub(crate) fn expect_columns(
    fields: &[&str],
    expected: usize,
    line: usize,
) -> Result<(), FormatError> {
    if fields.len() == expected {
        Ok(())
    } else {
        Err(FormatError::parse(
            line,
            format!("expected {expected} columns, got {}", fields.len()),
        ))
    }
}

/// Checks the first line of a columnar file against its required header.
pub(crate) fn expect_header(got: Option<&str>, want: &str) -> Result<(), FormatError> {
    match got {
        Some(h) if h.trim() == want => Ok(()),
        Some(h) => Err(FormatError::parse(
            1,
            format!("bad header: expected {want:?}, got {:?}", h.trim()),
        )),
        None => Err(FormatError::parse(1, format!("empty file: expected header {want:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn six_digit_formatting_picks_the_expected_shapes() {
        for (v, want) in [
            (0.0, "0"),
            (-0.0, "0"),
            (1.0, "1"),
            (100.0, "100"),
            (0.5, "0.5"),
            (-12.25, "-12.25"),
            (1234.5678, "1234.57"),
            (0.000123456, "0.000123456"),
            (0.0000123456, "1.23456e-5"),
            (1234567.0, "1.23457e6"),
            (999999.4, "999999"),
            (999999.5, "1e6"),
            (-2000.0, "-2000"),
        ] {
            assert_eq!(fmt_g6(v), want, "formatting {v}");
        }
    }

    #[test]
    fn raw_timestamps_keep_two_decimals() {
        assert_eq!(fmt_raw_ts(3.0), "3.00");
        assert_eq!(fmt_raw_ts(1599999999.98), "1599999999.98");
        assert_eq!(fmt_raw_ts(0.1 + 0.2), "0.30");
    }

    proptest! {
        /// fmt → parse → fmt is a fixpoint, the parsed value is within a
        /// half-unit in the 6th significant digit, and exact formatting
        /// round-trips bit-for-bit.
        #[test]
        fn formatting_round_trips(v in -1.0e9f64..1.0e9) {
            let s1 = fmt_g6(v);
            let back: f64 = s1.parse().unwrap();
            prop_assert_eq!(&fmt_g6(back), &s1);
            if v != 0.0 {
                prop_assert!(((back - v) / v).abs() < 1e-5, "{} vs {}", back, v);
            }
            let exact: f64 = fmt_exact(v).parse().unwrap();
            prop_assert_eq!(exact.to_bits(), v.to_bits());
        }
    }
}
