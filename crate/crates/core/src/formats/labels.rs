//! The annotation table (`*_labels.csv`) and its 30 Hz resampled variant
//! (`*_resampled.csv`): one row per vehicle per camera frame.
//!
//! Both pipeline directions flow through this schema — ground-truth
//! annotations, csv-sourced detections, and tracker predictions — so the
//! row mirrors [`Box3D`] plus provenance (frame index, timestamp, vehicle
//! id, camera). The resampled file appends the sixteen pixel coordinates
//! of the projected 3D box corners (corner order follows
//! [`crate::geometry::box_corners`]).

use super::{expect_columns, expect_header, field, fmt_exact, fmt_g6, split_record, FormatError};
use crate::evaluation::ObjectSeries;
use crate::geometry::ImagePoint;
use crate::tracking::Tracklet;
use crate::types::{Box3D, Direction, VehicleClass};
use std::fmt::Write as _;

pub(crate) const LABELS_HEADER: &str =
    "frame_index,timestamp,vehicle_id,vehicle_class,x_position,y_position,length,width,height,direction,camera";

/// One annotation row: a vehicle box in one camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRow {
    pub frame_index: u32,
    /// Corrected (or true) time, seconds; written in full precision.
    pub timestamp: f64,
    pub vehicle_id: u64,
    pub box3d: Box3D,
    pub camera: String,
}

/// A resampled-trajectory row: a label plus the projected pixel corners.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledRow {
    pub label: LabelRow,
    /// Pixel positions of the eight box corners in the row's camera.
    pub corners: [ImagePoint; 8],
}

fn push_label_fields(out: &mut String, r: &LabelRow) {
    let b = &r.box3d;
    let _ = write!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.frame_index,
        fmt_exact(r.timestamp),
        r.vehicle_id,
        b.class,
        fmt_g6(b.x),
        fmt_g6(b.y),
        fmt_g6(b.length),
        fmt_g6(b.width),
        fmt_g6(b.height),
        b.direction,
        r.camera,
    );
}

/// Serializes label rows in the given order.
pub fn write_labels(rows: &[LabelRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(LABELS_HEADER);
    out.push('\n');
    for r in rows {
        push_label_fields(&mut out, r);
        out.push('\n');
    }
    out
}

fn parse_label_fields(f: &[&str], line: usize) -> Result<LabelRow, FormatError> {
    Ok(LabelRow {
        frame_index: field(f[0], line, "frame_index")?,
        timestamp: field(f[1], line, "timestamp")?,
        vehicle_id: field(f[2], line, "vehicle_id")?,
        box3d: Box3D {
            x: field(f[4], line, "x_position")?,
            y: field(f[5], line, "y_position")?,
            length: field(f[6], line, "length")?,
            width: field(f[7], line, "width")?,
            height: field(f[8], line, "height")?,
            direction: field::<Direction>(f[9], line, "direction")?,
            class: field::<VehicleClass>(f[3], line, "vehicle_class")?,
        },
        camera: f[10].to_string(),
    })
}

/// Parses a labels file (header required).
pub fn read_labels(text: &str) -> Result<Vec<LabelRow>, FormatError> {
    let mut lines = text.lines().enumerate();
    expect_header(lines.next().map(|(_, l)| l), LABELS_HEADER)?;
    let mut rows = Vec::new();
    for (i, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let f = split_record(raw);
        expect_columns(&f, 11, i + 1)?;
        rows.push(parse_label_fields(&f, i + 1)?);
    }
    Ok(rows)
}

fn resampled_header() -> String {
    let mut h = LABELS_HEADER.to_string();
    for k in 1..=8 {
        let _ = write!(h, ",corner{k}_u,corner{k}_v");
    }
    h
}

/// Serializes resampled rows (labels plus 16 corner pixel values).
pub fn write_resampled(rows: &[ResampledRow]) -> String {
    let mut out = String::with_capacity(128 * (rows.len() + 1));
    out.push_str(&resampled_header());
    out.push('\n');
    for r in rows {
        push_label_fields(&mut out, &r.label);
        for c in &r.corners {
            let _ = write!(out, ",{},{}", fmt_g6(c.u), fmt_g6(c.v));
        }
        out.push('\n');
    }
    out
}

/// Parses a resampled file (header required).
pub fn read_resampled(text: &str) -> Result<Vec<ResampledRow>, FormatError> {
    let mut lines = text.lines().enumerate();
    expect_header(lines.next().map(|(_, l)| l), &resampled_header())?;
    let mut rows = Vec::new();
    for (i, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let f = split_record(raw);
        expect_columns(&f, 27, i + 1)?;
        let label = parse_label_fields(&f, i + 1)?;
        let mut corners = [ImagePoint::new(0.0, 0.0); 8];
        for (k, c) in corners.iter_mut().enumerate() {
            c.u = field(f[11 + 2 * k], i + 1, "corner_u")?;
            c.v = field(f[12 + 2 * k], i + 1, "corner_v")?;
        }
        rows.push(ResampledRow { label, corners });
    }
    Ok(rows)
}

/// Groups label rows into per-object time series (sorted by time), the
/// shape evaluation and timesync consume. Rows from different cameras
/// interleave — exactly the multi-view annotation stream the spline
/// resampler is built for.
pub fn labels_to_series(rows: &[LabelRow]) -> ObjectSeries {
    let mut series = ObjectSeries::new();
    for r in rows {
        series
            .entry(r.vehicle_id)
            .or_default()
            .push((r.timestamp, r.box3d));
    }
    for samples in series.values_mut() {
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    series
}

/// Flattens a per-object series back to rows under one camera name, frame
/// indices numbered per object in time order.
pub fn series_to_labels(series: &ObjectSeries, camera: &str) -> Vec<LabelRow> {
    let mut rows = Vec::new();
    for (&id, samples) in series {
        for (k, &(t, b)) in samples.iter().enumerate() {
            rows.push(LabelRow {
                frame_index: k as u32,
                timestamp: t,
                vehicle_id: id,
                box3d: b,
                camera: camera.to_string(),
            });
        }
    }
    rows
}

/// Prediction rows from finished tracklets: one row per sample, frame
/// indices numbered within each track, camera column naming every source
/// camera (joined with `+` — this dialect reserves the comma).
pub fn tracklets_to_labels(tracklets: &[Tracklet]) -> Vec<LabelRow> {
    let mut rows = Vec::new();
    for tr in tracklets {
        let camera = tr
            .source_cameras
            .iter()
            .cloned()
            .collect::<Vec<_>>()
            .join("+");
        for (k, &(t, b)) in tr.samples.iter().enumerate() {
            rows.push(LabelRow {
                frame_index: k as u32,
                timestamp: t,
                vehicle_id: tr.id,
                box3d: b,
                camera: camera.clone(),
            });
        }
    }
    rows
}
