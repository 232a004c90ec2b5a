//! Pipeline specs: the key-value config selecting detector source,
//! tracker, fusion mode, and evaluation knobs for `track` and `eval`.
//!
//! Keys (defaults in parentheses):
//!
//! ```text
//! name          ({tracker}+{fusion})   report row label
//! detector      (simulated)            simulated | csv
//! tracker       (kiou)                 kiou | byte | gt-tracklets
//! fusion        (none)                 none | df | tf | df+tf
//! min_iou       (0.3)    association gate, footprint IOU
//! byte_high     (0.3)    two-stage confidence split (byte tracker)
//! byte_low      (0.01)   below this, detections are discarded
//! df_iou        (0.01)   cross-camera detection-fusion NMS threshold
//! n_init        (3)      hits to confirm a track
//! n_miss        (8)      misses to drop a track
//! q_diag        (0.5,0.1,2,0.5)  process noise diag, ft²/s and ft²/s³
//! r_diag        (1,0.25)         measurement noise diag, ft²
//! stitch_t_overlap     (0.5) s    stitch_t_gap_max (10) s
//! stitch_lambda_dim    (0.5)      stitch_max_link_cost (15) ft
//! resample_rate (30) Hz  evaluation timeline
//! iou_threshold (0.3)    CLEAR-MOT match gate
//! ap_thresholds   (0.3,0.5,0.7)       detection AP report points
//! hota_thresholds (0.05,0.10,…,0.95)  HOTA integration grid
//! lane_width    (12) ft  time-space diagram bucketing
//! ```

use crate::CliError;
use corridor_core::evaluation::EvalConfig;
use corridor_core::formats::KeyValues;
use corridor_core::tracking::{FusionMode, TrackerConfig, TrackerKind};

/// Where `track` gets its detections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorSource {
    /// Regenerate the simulated detector output from the scene's config
    /// echo (deterministic replay).
    Simulated,
    /// Read detections from a labels-schema csv (confidence fixed at 1).
    Csv,
}

/// Which tracker runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackerChoice {
    Kiou,
    Byte,
    /// Oracle passthrough: ground-truth labels grouped by vehicle id (the
    /// upper-bound pipeline; skips detection and association entirely).
    GroundTruth,
}

/// A fully resolved pipeline spec.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSpec {
    pub name: String,
    pub detector: DetectorSource,
    pub tracker: TrackerChoice,
    /// Tracker/fusion knobs; `config.tracker` mirrors `tracker` for the
    /// two real trackers and is ignored for the oracle.
    pub config: TrackerConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineSpec {
    fn default() -> Self {
        PipelineSpec {
            name: "kiou+none".to_string(),
            detector: DetectorSource::Simulated,
            tracker: TrackerChoice::Kiou,
            config: TrackerConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn fusion_name(f: FusionMode) -> &'static str {
    match f {
        FusionMode::None => "none",
        FusionMode::Df => "df",
        FusionMode::Tf => "tf",
        FusionMode::DfTf => "df+tf",
    }
}

fn tracker_name(t: TrackerChoice) -> &'static str {
    match t {
        TrackerChoice::Kiou => "kiou",
        TrackerChoice::Byte => "byte",
        TrackerChoice::GroundTruth => "gt-tracklets",
    }
}

impl PipelineSpec {
    /// Parses a pipeline spec, filling unstated keys from the defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let kv = KeyValues::parse(text)?;
        for key in kv.keys() {
            if !KNOWN_KEYS.contains(&key) {
                return Err(CliError::Parse(format!("unknown pipeline key '{key}'")));
            }
        }
        let mut spec = PipelineSpec::default();

        spec.tracker = match kv.opt::<String>("tracker")?.as_deref() {
            None | Some("kiou") => TrackerChoice::Kiou,
            Some("byte") => TrackerChoice::Byte,
            Some("gt-tracklets") => TrackerChoice::GroundTruth,
            Some(other) => {
                return Err(CliError::Parse(format!(
                    "tracker must be kiou, byte, or gt-tracklets, got '{other}'"
                )))
            }
        };
        spec.detector = match kv.opt::<String>("detector")?.as_deref() {
            None | Some("simulated") => DetectorSource::Simulated,
            Some("csv") => DetectorSource::Csv,
            Some(other) => {
                return Err(CliError::Parse(format!(
                    "detector must be simulated or csv, got '{other}'"
                )))
            }
        };
        let c = &mut spec.config;
        c.tracker = match spec.tracker {
            TrackerChoice::Byte => TrackerKind::Byte,
            _ => TrackerKind::Kiou,
        };
        c.fusion = match kv.opt::<String>("fusion")?.as_deref() {
            None | Some("none") => FusionMode::None,
            Some("df") => FusionMode::Df,
            Some("tf") => FusionMode::Tf,
            Some("df+tf") => FusionMode::DfTf,
            Some(other) => {
                return Err(CliError::Parse(format!(
                    "fusion must be none, df, tf, or df+tf, got '{other}'"
                )))
            }
        };
        c.min_iou = kv.opt_or("min_iou", c.min_iou)?;
        c.byte_high = kv.opt_or("byte_high", c.byte_high)?;
        c.byte_low = kv.opt_or("byte_low", c.byte_low)?;
        c.df_iou = kv.opt_or("df_iou", c.df_iou)?;
        c.n_init = kv.opt_or("n_init", c.n_init)?;
        c.n_miss = kv.opt_or("n_miss", c.n_miss)?;
        if let Some(q) = kv.list::<f64>("q_diag")? {
            c.kalman.q_diag = fixed::<4>("q_diag", q)?;
        }
        if let Some(r) = kv.list::<f64>("r_diag")? {
            c.kalman.r_diag = fixed::<2>("r_diag", r)?;
        }
        c.stitch.t_overlap = kv.opt_or("stitch_t_overlap", c.stitch.t_overlap)?;
        c.stitch.t_gap_max = kv.opt_or("stitch_t_gap_max", c.stitch.t_gap_max)?;
        c.stitch.lambda_dim = kv.opt_or("stitch_lambda_dim", c.stitch.lambda_dim)?;
        c.stitch.max_link_cost = kv.opt_or("stitch_max_link_cost", c.stitch.max_link_cost)?;

        spec.eval.resample_rate = kv.opt_or("resample_rate", spec.eval.resample_rate)?;
        spec.eval.iou_threshold = kv.opt_or("iou_threshold", spec.eval.iou_threshold)?;
        if let Some(aps) = kv.list::<f64>("ap_thresholds")? {
            spec.eval.ap_thresholds = aps;
        }
        if let Some(hotas) = kv.list::<f64>("hota_thresholds")? {
            spec.eval.hota_thresholds = hotas;
        }
        spec.eval.lane_width = kv.opt_or("lane_width", spec.eval.lane_width)?;

        spec.name = kv.opt::<String>("name")?.unwrap_or_else(|| {
            format!("{}+{}", tracker_name(spec.tracker), fusion_name(spec.config.fusion))
        });

        spec.validate()?;
        Ok(spec)
    }

    /// Range checks the tracker cannot perform for itself.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Validation(msg));
        let c = &self.config;
        if !(c.min_iou > 0.0 && c.min_iou < 1.0) {
            return bad(format!("min_iou must lie in (0, 1), got {}", c.min_iou));
        }
        if !(0.0 <= c.byte_low && c.byte_low <= c.byte_high && c.byte_high <= 1.0) {
            return bad(format!(
                "need 0 <= byte_low <= byte_high <= 1, got {} and {}",
                c.byte_low, c.byte_high
            ));
        }
        if !(c.df_iou > 0.0 && c.df_iou < 1.0) {
            return bad(format!("df_iou must lie in (0, 1), got {}", c.df_iou));
        }
        if c.n_init == 0 {
            return bad("n_init must be at least 1".to_string());
        }
        if c.kalman.q_diag.iter().chain(&c.kalman.r_diag).any(|v| *v < 0.0) {
            return bad("Kalman noise diagonals must be non-negative".to_string());
        }
        if !(c.stitch.t_overlap >= 0.0
            && c.stitch.t_gap_max >= 0.0
            && c.stitch.lambda_dim >= 0.0
            && c.stitch.max_link_cost > 0.0)
        {
            return bad("stitch parameters must be non-negative (max_link_cost positive)".to_string());
        }
        if self.name.is_empty() || self.name.contains([',', '/', ' ']) {
            return bad(format!(
                "pipeline name '{}' must be non-empty without commas, slashes, or spaces",
                self.name
            ));
        }
        self.eval.validate()?;
        Ok(())
    }
}

fn fixed<const N: usize>(key: &str, v: Vec<f64>) -> Result<[f64; N], CliError> {
    v.try_into()
        .map_err(|v: Vec<f64>| CliError::Parse(format!("{key} needs {N} values, got {}", v.len())))
}

/// Every key the parser understands; unknown keys are rejected.
const KNOWN_KEYS: [&str; 21] = [
    "name",
    "detector",
    "tracker",
    "fusion",
    "min_iou",
    "byte_high",
    "byte_low",
    "df_iou",
    "n_init",
    "n_miss",
    "q_diag",
    "r_diag",
    "stitch_t_overlap",
    "stitch_t_gap_max",
    "stitch_lambda_dim",
    "stitch_max_link_cost",
    "resample_rate",
    "iou_threshold",
    "ap_thresholds",
    "hota_thresholds",
    "lane_width",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_spec_is_the_default_pipeline() {
        let spec = PipelineSpec::parse("").unwrap();
        assert_eq!(spec, PipelineSpec::default());
        assert_eq!(spec.name, "kiou+none");
    }

    #[test]
    fn names_derive_from_tracker_and_fusion() {
        let spec = PipelineSpec::parse("tracker = byte\nfusion = df+tf\n").unwrap();
        assert_eq!(spec.name, "byte+df+tf");
        assert_eq!(spec.tracker, TrackerChoice::Byte);
        assert_eq!(spec.config.tracker, TrackerKind::Byte);
        assert_eq!(spec.config.fusion, FusionMode::DfTf);

        let spec = PipelineSpec::parse("tracker = gt-tracklets\nname = oracle\n").unwrap();
        assert_eq!(spec.name, "oracle");
        assert_eq!(spec.tracker, TrackerChoice::GroundTruth);
    }

    #[test]
    fn unknown_names_and_bad_ranges_are_rejected() {
        assert!(matches!(
            PipelineSpec::parse("tracker = sort"),
            Err(CliError::Parse(m)) if m.contains("sort")
        ));
        assert!(matches!(
            PipelineSpec::parse("fusion = maybe"),
            Err(CliError::Parse(_))
        ));
        assert!(matches!(
            PipelineSpec::parse("min_iou = 1.5"),
            Err(CliError::Validation(_))
        ));
        assert!(matches!(
            PipelineSpec::parse("byte_low = 0.5\nbyte_high = 0.2"),
            Err(CliError::Validation(_))
        ));
        assert!(matches!(
            PipelineSpec::parse("q_diag = 1,2,3"),
            Err(CliError::Parse(_))
        ));
    }
}
