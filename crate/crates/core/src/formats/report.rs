//! Scoreboard documents: the tracking report as JSON and csv, and the
//! per-lane time-space series for plotting.
//!
//! The csv carries one row per (pipeline, scene) plus one `mean` row per
//! pipeline — the per-pipeline unweighted scene average. The JSON document
//! is one pipeline's full report in machine-friendly form (full-precision
//! numbers); `read_report_json` inverts it so separate runs can be merged
//! into a combined table.

use super::{expect_columns, expect_header, field, fmt_g6, split_record, FormatError};
use crate::evaluation::{MatchStatus, MetricsReport, ScoreRow, TimespacePoint};
use crate::types::Direction;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub(crate) const REPORT_HEADER: &str =
    "pipeline,scene,hota,deta,assa,mota,motp,recall,precision,gt_pct,pred_pct,mt_pct,ml_pct,sw_per_gt";
pub(crate) const TIMESPACE_HEADER: &str = "direction,lane,t,x,id,status";

/// One scoreboard line: a pipeline evaluated on a scene (or its `mean`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub pipeline: String,
    /// Scene id, or `mean` for the per-pipeline aggregate.
    pub scene: String,
    pub scores: ScoreRow,
}

const METRIC_KEYS: [&str; 12] = [
    "hota", "deta", "assa", "mota", "motp", "recall", "precision", "gt_pct", "pred_pct",
    "mt_pct", "ml_pct", "sw_per_gt",
];

fn metric_values(s: &ScoreRow) -> [f64; 12] {
    [
        s.hota, s.deta, s.assa, s.mota, s.motp, s.recall, s.precision, s.gt_pct, s.pred_pct,
        s.mt_pct, s.ml_pct, s.switches_per_gt,
    ]
}

fn score_from_values(v: [f64; 12]) -> ScoreRow {
    ScoreRow {
        hota: v[0],
        deta: v[1],
        assa: v[2],
        mota: v[3],
        motp: v[4],
        recall: v[5],
        precision: v[6],
        gt_pct: v[7],
        pred_pct: v[8],
        mt_pct: v[9],
        ml_pct: v[10],
        switches_per_gt: v[11],
    }
}

/// Serializes scoreboard rows in the given order.
pub fn write_report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::with_capacity(96 * (rows.len() + 1));
    out.push_str(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{}", r.pipeline, r.scene);
        for v in metric_values(&r.scores) {
            let _ = write!(out, ",{}", fmt_g6(v));
        }
        out.push('\n');
    }
    out
}

/// Parses a scoreboard csv.
pub fn read_report_csv(text: &str) -> Result<Vec<ReportRow>, FormatError> {
    let mut lines = text.lines().enumerate();
    expect_header(lines.next().map(|(_, l)| l), REPORT_HEADER)?;
    let mut rows = Vec::new();
    for (i, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let f = split_record(raw);
        expect_columns(&f, 14, i + 1)?;
        let mut v = [0.0; 12];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = field(f[k + 2], i + 1, METRIC_KEYS[k])?;
        }
        rows.push(ReportRow {
            pipeline: f[0].to_string(),
            scene: f[1].to_string(),
            scores: score_from_values(v),
        });
    }
    Ok(rows)
}

fn score_to_json(s: &ScoreRow) -> Value {
    let mut m = Map::new();
    for (k, v) in METRIC_KEYS.iter().zip(metric_values(s)) {
        m.insert(
            k.to_string(),
            Value::Number(serde_json::Number::from_f64(v).expect("metrics are finite")),
        );
    }
    Value::Object(m)
}

fn score_from_json(v: &Value) -> Result<ScoreRow, FormatError> {
    let obj = v
        .as_object()
        .ok_or_else(|| FormatError::parse(0, "score entry is not an object"))?;
    let mut vals = [0.0; 12];
    for (k, slot) in METRIC_KEYS.iter().zip(vals.iter_mut()) {
        *slot = obj
            .get(*k)
            .and_then(Value::as_f64)
            .ok_or_else(|| FormatError::parse(0, format!("score entry missing '{k}'")))?;
    }
    Ok(score_from_values(vals))
}

/// One pipeline's report as a JSON document (full-precision numbers).
pub fn report_to_json(pipeline: &str, report: &MetricsReport) -> Value {
    let scenes: Map<String, Value> = report
        .per_scene
        .iter()
        .map(|(scene, row)| (scene.clone(), score_to_json(row)))
        .collect();
    json!({
        "pipeline": pipeline,
        "scenes": scenes,
        "aggregate": score_to_json(&report.aggregate),
    })
}

/// Inverts [`report_to_json`]. The aggregate is recomputed from the scene
/// rows (it is derived data; the two agree for documents this module
/// wrote).
pub fn read_report_json(text: &str) -> Result<(String, MetricsReport), FormatError> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| FormatError::parse(e.line(), e.to_string()))?;
    let pipeline = doc
        .get("pipeline")
        .and_then(Value::as_str)
        .ok_or_else(|| FormatError::parse(0, "report missing 'pipeline'"))?
        .to_string();
    let scenes = doc
        .get("scenes")
        .and_then(Value::as_object)
        .ok_or_else(|| FormatError::parse(0, "report missing 'scenes' object"))?;
    let mut per_scene = BTreeMap::new();
    for (name, entry) in scenes {
        per_scene.insert(name.clone(), score_from_json(entry)?);
    }
    Ok((pipeline, MetricsReport::from_scenes(per_scene)))
}

fn status_str(s: MatchStatus) -> &'static str {
    match s {
        MatchStatus::Tp => "tp",
        MatchStatus::Fp => "fp",
        MatchStatus::Fn => "fn",
    }
}

/// Serializes per-lane time-space series (direction, lane sorted).
pub fn write_timespace_csv(series: &BTreeMap<(Direction, u32), Vec<TimespacePoint>>) -> String {
    let mut out = String::new();
    out.push_str(TIMESPACE_HEADER);
    out.push('\n');
    for ((dir, lane), points) in series {
        for p in points {
            let _ = writeln!(
                out,
                "{dir},{lane},{},{},{},{}",
                fmt_g6(p.t),
                fmt_g6(p.x),
                p.id,
                status_str(p.status),
            );
        }
    }
    out
}

/// Parses a time-space csv back into per-lane series.
pub fn read_timespace_csv(
    text: &str,
) -> Result<BTreeMap<(Direction, u32), Vec<TimespacePoint>>, FormatError> {
    let mut lines = text.lines().enumerate();
    expect_header(lines.next().map(|(_, l)| l), TIMESPACE_HEADER)?;
    let mut out: BTreeMap<(Direction, u32), Vec<TimespacePoint>> = BTreeMap::new();
    for (i, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let f = split_record(raw);
        expect_columns(&f, 6, i + 1)?;
        let status = match f[5] {
            "tp" => MatchStatus::Tp,
            "fp" => MatchStatus::Fp,
            "fn" => MatchStatus::Fn,
            other => {
                return Err(FormatError::parse(
                    i + 1,
                    format!("unknown match status {other:?}"),
                ))
            }
        };
        out.entry((field(f[0], i + 1, "direction")?, field(f[1], i + 1, "lane")?))
            .or_default()
            .push(TimespacePoint {
                t: field(f[2], i + 1, "t")?,
                x: field(f[3], i + 1, "x")?,
                id: field(f[4], i + 1, "id")?,
                status,
            });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(seed: f64) -> ScoreRow {
        score_from_values(std::array::from_fn(|k| seed + k as f64 * 0.125))
    }

    #[test]
    fn report_csv_round_trips() {
        let rows = vec![
            ReportRow {
                pipeline: "kiou+df+tf".to_string(),
                scene: "sim42".to_string(),
                scores: score(90.0),
            },
            ReportRow {
                pipeline: "kiou+df+tf".to_string(),
                scene: "mean".to_string(),
                scores: score(90.0),
            },
        ];
        let text = write_report_csv(&rows);
        let back = read_report_csv(&text).unwrap();
        assert_eq!(back, rows);
        assert_eq!(write_report_csv(&back), text);
    }

    #[test]
    fn report_json_round_trips_with_full_precision() {
        let mut per_scene = BTreeMap::new();
        per_scene.insert("a".to_string(), score(1.0 / 3.0));
        per_scene.insert("b".to_string(), score(87.654321));
        let report = MetricsReport::from_scenes(per_scene);
        let text = report_to_json("byte+none", &report).to_string();
        let (pipeline, back) = read_report_json(&text).unwrap();
        assert_eq!(pipeline, "byte+none");
        assert_eq!(back.per_scene, report.per_scene);
        assert_eq!(back.aggregate, report.aggregate);
    }

    #[test]
    fn timespace_csv_round_trips() {
        let mut series = BTreeMap::new();
        series.insert(
            (Direction::Eb, 2),
            vec![
                TimespacePoint { t: 0.5, x: 100.25, id: 3, status: MatchStatus::Tp },
                TimespacePoint { t: 0.5333333, x: 103.5, id: 3, status: MatchStatus::Fn },
            ],
        );
        series.insert(
            (Direction::Wb, 1),
            vec![TimespacePoint { t: 1.0, x: 900.0, id: 8, status: MatchStatus::Fp }],
        );
        let text = write_timespace_csv(&series);
        let back = read_timespace_csv(&text).unwrap();
        assert_eq!(write_timespace_csv(&back), text);
        assert_eq!(back[&(Direction::Eb, 2)].len(), 2);
    }

    #[test]
    fn malformed_documents_are_rejected() {
        assert!(matches!(
            read_report_json("{not json"),
            Err(FormatError::Parse { .. })
        ));
        assert!(matches!(
            read_report_json("{\"pipeline\": 3}"),
            Err(FormatError::Parse { .. })
        ));
        let bad = format!("{TIMESPACE_HEADER}\nEB,1,0.5,10,3,maybe\n");
        assert!(matches!(
            read_timespace_csv(&bad),
            Err(FormatError::Parse { line: 2, .. })
        ));
    }
}
