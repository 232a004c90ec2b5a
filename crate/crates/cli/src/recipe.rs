//! Scene recipes: the key-value config file driving `corridor simulate`.
//!
//! A recipe bundles everything a scene needs — traffic, camera bank,
//! timing defects, and detector noise — under one seed. Every key has a
//! default, so the minimal config is empty; `simulate` echoes the fully
//! resolved recipe next to its artifacts, and that echo regenerates the
//! identical scene (the echo is how `track --detector simulated` replays
//! the exact detections later without any binary state).
//!
//! Keys (defaults in parentheses):
//!
//! ```text
//! name                (sim{seed})     scene id used in artifact names
//! seed                (0)
//! duration            (10) s          lanes_per_direction (4)
//! lane_width          (12) ft         roadway_length      (2000) ft
//! vehicle_count       (20)            headway             (1) s
//! profile             (free-flow)     free-flow | stop-and-go
//! speed_low/high      (90/110) ft/s   free-flow band
//! peak_speed          (40) ft/s       stop-and-go cycle: S-ramp time,
//! ramp_s/cruise_s/dwell_s (8/6/5) s   cruise time, stopped time
//! class_mix           (16,28,7,9,7,5) weights, class declaration order
//! camera_count        (16)            camera_fov (roadway_length/8) ft
//! nominal_fps         (30)            quantization (0.01) s
//! offset_low/high     (0/0) s         per-camera clock offset band
//! p_skip / p_double   (0/0)           per-slot frame defect rates
//! noise_seed          (seed)          detector-noise stream seed
//! position_sigma      (0) ft          dimension_sigma (0) ft
//! confidence_spread   (0)             true boxes score 1 − U(0, spread)
//! fp_confidence_low/high (0.05/0.5)   p_fp (0)   per-frame ghost rate
//! fp_lateral_low/high (-48/48) ft     ghost lateral band
//! p_fn                (0)             uniform per-box miss rate
//! occlusion_base      (0)             occlusion_per_lane (0) per frame
//! occlusion_max_window (1) frames     occlusion window upper bound
//! ```
//!
//! The echo additionally records one `fov.{camera_id} = lo,hi` line per
//! camera (informational; parsing ignores them and recomputes the layout).

use crate::CliError;
use corridor_core::formats::{fmt_exact, KeyValues};
use corridor_core::simulator::{
    camera_layout, generate_scene, CameraConfig, NoiseConfig, OcclusionModel, SceneConfig,
    SceneTruth, SpeedProfile, TimingConfig,
};

/// Fully resolved scene recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecipe {
    /// Scene id: artifact files are named `{name}_labels.csv` etc.
    pub name: String,
    pub scene: SceneConfig,
    pub timing: TimingConfig,
    pub camera_count: usize,
    /// Per-camera fov length in feet.
    pub camera_fov: f64,
    pub noise: NoiseConfig,
}

impl SceneRecipe {
    /// The all-defaults recipe for a seed: free-flow traffic, 16 cameras,
    /// quantization as the only timing defect, noise-free detector.
    pub fn with_seed(seed: u64) -> Self {
        let scene = SceneConfig {
            seed,
            ..SceneConfig::default()
        };
        SceneRecipe {
            name: format!("sim{seed}"),
            camera_fov: scene.roadway_length / 8.0,
            camera_count: 16,
            timing: TimingConfig::default(),
            noise: NoiseConfig::none(seed),
            scene,
        }
    }

    /// Parses a recipe, filling unstated keys from the defaults. `seed`
    /// (when given) overrides the config's own seed *before* defaults that
    /// derive from it (name, noise seed) resolve.
    pub fn parse(text: &str, seed_override: Option<u64>) -> Result<Self, CliError> {
        let kv = KeyValues::parse(text)?;
        for key in kv.keys() {
            if !(KNOWN_KEYS.contains(&key) || key.starts_with("fov.")) {
                return Err(CliError::Parse(format!("unknown config key '{key}'")));
            }
        }
        let seed = match seed_override {
            Some(s) => s,
            None => kv.opt_or("seed", 0u64)?,
        };
        let mut base = SceneRecipe::with_seed(seed);

        base.scene.duration = kv.opt_or("duration", base.scene.duration)?;
        base.scene.lanes_per_direction =
            kv.opt_or("lanes_per_direction", base.scene.lanes_per_direction)?;
        base.scene.lane_width = kv.opt_or("lane_width", base.scene.lane_width)?;
        base.scene.roadway_length = kv.opt_or("roadway_length", base.scene.roadway_length)?;
        base.scene.vehicle_count = kv.opt_or("vehicle_count", base.scene.vehicle_count)?;
        base.scene.headway = kv.opt_or("headway", base.scene.headway)?;
        base.scene.profile = match kv.opt::<String>("profile")?.as_deref() {
            None | Some("free-flow") => SpeedProfile::FreeFlow {
                low: kv.opt_or("speed_low", 90.0)?,
                high: kv.opt_or("speed_high", 110.0)?,
            },
            Some("stop-and-go") => SpeedProfile::StopAndGo {
                peak: kv.opt_or("peak_speed", 40.0)?,
                ramp_s: kv.opt_or("ramp_s", 8.0)?,
                cruise_s: kv.opt_or("cruise_s", 6.0)?,
                dwell_s: kv.opt_or("dwell_s", 5.0)?,
            },
            Some(other) => {
                return Err(CliError::Parse(format!(
                    "profile must be free-flow or stop-and-go, got '{other}'"
                )))
            }
        };
        if let Some(weights) = kv.list::<f64>("class_mix")? {
            base.scene.class_mix = weights.try_into().map_err(|v: Vec<f64>| {
                CliError::Parse(format!("class_mix needs 6 weights, got {}", v.len()))
            })?;
        }

        base.name = kv
            .opt::<String>("name")?
            .unwrap_or_else(|| format!("sim{seed}"));
        base.camera_count = kv.opt_or("camera_count", base.camera_count)?;
        base.camera_fov = kv.opt_or(
            "camera_fov",
            base.scene.roadway_length / 2000.0 * 250.0,
        )?;

        base.timing.nominal_fps = kv.opt_or("nominal_fps", base.timing.nominal_fps)?;
        base.timing.quantization = kv.opt_or("quantization", base.timing.quantization)?;
        base.timing.offset_range = (
            kv.opt_or("offset_low", base.timing.offset_range.0)?,
            kv.opt_or("offset_high", base.timing.offset_range.1)?,
        );
        base.timing.p_skip = kv.opt_or("p_skip", base.timing.p_skip)?;
        base.timing.p_double = kv.opt_or("p_double", base.timing.p_double)?;

        let n = &mut base.noise;
        n.seed = kv.opt_or("noise_seed", seed)?;
        n.position_sigma = kv.opt_or("position_sigma", n.position_sigma)?;
        n.dimension_sigma = kv.opt_or("dimension_sigma", n.dimension_sigma)?;
        n.confidence_spread = kv.opt_or("confidence_spread", n.confidence_spread)?;
        n.fp_confidence = (
            kv.opt_or("fp_confidence_low", n.fp_confidence.0)?,
            kv.opt_or("fp_confidence_high", n.fp_confidence.1)?,
        );
        n.p_fp = kv.opt_or("p_fp", n.p_fp)?;
        n.fp_lateral_range = (
            kv.opt_or("fp_lateral_low", n.fp_lateral_range.0)?,
            kv.opt_or("fp_lateral_high", n.fp_lateral_range.1)?,
        );
        n.p_fn = kv.opt_or("p_fn", n.p_fn)?;
        n.occlusion = OcclusionModel {
            p_start_base: kv.opt_or("occlusion_base", 0.0)?,
            p_start_per_lane: kv.opt_or("occlusion_per_lane", 0.0)?,
            max_window: kv.opt_or("occlusion_max_window", 1u32)?,
            reference_y: -(base.scene.lanes_per_direction as f64 * base.scene.lane_width + 20.0),
            lane_width: base.scene.lane_width,
        };

        base.validate()?;
        Ok(base)
    }

    /// Range validation across the bundled configs.
    pub fn validate(&self) -> Result<(), CliError> {
        self.scene.validate()?;
        self.timing.validate()?;
        self.noise.validate()?;
        if self.name.is_empty() || self.name.contains([',', '/', ' ']) {
            return Err(CliError::Validation(format!(
                "scene name '{}' must be non-empty without commas, slashes, or spaces",
                self.name
            )));
        }
        Ok(())
    }

    /// The fully resolved key-value echo. Parsing it reproduces the recipe
    /// (`fov.*` lines are informational and ignored by the parser).
    pub fn to_keyvalues(&self, cameras: &[CameraConfig]) -> KeyValues {
        let mut kv = KeyValues::new();
        let mut put = |k: &str, v: String| kv.set(k, &v);
        put("name", self.name.clone());
        put("seed", self.scene.seed.to_string());
        put("duration", fmt_exact(self.scene.duration));
        put("lanes_per_direction", self.scene.lanes_per_direction.to_string());
        put("lane_width", fmt_exact(self.scene.lane_width));
        put("roadway_length", fmt_exact(self.scene.roadway_length));
        put("vehicle_count", self.scene.vehicle_count.to_string());
        put("headway", fmt_exact(self.scene.headway));
        match self.scene.profile {
            SpeedProfile::FreeFlow { low, high } => {
                put("profile", "free-flow".to_string());
                put("speed_low", fmt_exact(low));
                put("speed_high", fmt_exact(high));
            }
            SpeedProfile::StopAndGo { peak, ramp_s, cruise_s, dwell_s } => {
                put("profile", "stop-and-go".to_string());
                put("peak_speed", fmt_exact(peak));
                put("ramp_s", fmt_exact(ramp_s));
                put("cruise_s", fmt_exact(cruise_s));
                put("dwell_s", fmt_exact(dwell_s));
            }
        }
        let mix: Vec<String> = self.scene.class_mix.iter().map(|w| fmt_exact(*w)).collect();
        put("class_mix", mix.join(","));
        put("camera_count", self.camera_count.to_string());
        put("camera_fov", fmt_exact(self.camera_fov));
        put("nominal_fps", fmt_exact(self.timing.nominal_fps));
        put("quantization", fmt_exact(self.timing.quantization));
        put("offset_low", fmt_exact(self.timing.offset_range.0));
        put("offset_high", fmt_exact(self.timing.offset_range.1));
        put("p_skip", fmt_exact(self.timing.p_skip));
        put("p_double", fmt_exact(self.timing.p_double));
        put("noise_seed", self.noise.seed.to_string());
        put("position_sigma", fmt_exact(self.noise.position_sigma));
        put("dimension_sigma", fmt_exact(self.noise.dimension_sigma));
        put("confidence_spread", fmt_exact(self.noise.confidence_spread));
        put("fp_confidence_low", fmt_exact(self.noise.fp_confidence.0));
        put("fp_confidence_high", fmt_exact(self.noise.fp_confidence.1));
        put("p_fp", fmt_exact(self.noise.p_fp));
        put("fp_lateral_low", fmt_exact(self.noise.fp_lateral_range.0));
        put("fp_lateral_high", fmt_exact(self.noise.fp_lateral_range.1));
        put("p_fn", fmt_exact(self.noise.p_fn));
        put("occlusion_base", fmt_exact(self.noise.occlusion.p_start_base));
        put("occlusion_per_lane", fmt_exact(self.noise.occlusion.p_start_per_lane));
        put("occlusion_max_window", self.noise.occlusion.max_window.to_string());
        for cam in cameras {
            put(
                &format!("fov.{}", cam.id),
                format!("{},{}", fmt_exact(cam.fov.0), fmt_exact(cam.fov.1)),
            );
        }
        kv
    }

    /// Generates the scene truth and camera bank for this recipe.
    ///
    /// Determinism note: truth depends only on the scene config, the bank
    /// only on (scene, timing, count, fov) — so any artifact consumer can
    /// rebuild both from the config echo alone.
    pub fn build(&self) -> Result<(SceneTruth, Vec<CameraConfig>), CliError> {
        self.validate()?;
        let truth = generate_scene(&self.scene)?;
        let cameras = camera_layout(&self.scene, &self.timing, self.camera_count, self.camera_fov)?;
        Ok((truth, cameras))
    }
}

/// Every key the parser understands (besides the `fov.*` echoes); unknown
/// keys are rejected so typos cannot silently fall back to defaults.
const KNOWN_KEYS: [&str; 36] = [
    "name",
    "seed",
    "duration",
    "lanes_per_direction",
    "lane_width",
    "roadway_length",
    "vehicle_count",
    "headway",
    "profile",
    "speed_low",
    "speed_high",
    "peak_speed",
    "ramp_s",
    "cruise_s",
    "dwell_s",
    "class_mix",
    "camera_count",
    "camera_fov",
    "nominal_fps",
    "quantization",
    "offset_low",
    "offset_high",
    "p_skip",
    "p_double",
    "noise_seed",
    "position_sigma",
    "dimension_sigma",
    "confidence_spread",
    "fp_confidence_low",
    "fp_confidence_high",
    "p_fp",
    "fp_lateral_low",
    "fp_lateral_high",
    "p_fn",
    "occlusion_base",
    "occlusion_per_lane",
    "occlusion_max_window",
];
