//! Run configuration: one flat TOML table (`.cfg`). Every key has a default;
//! unknown keys are rejected. Command-line flags map 1:1 onto keys and
//! override the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::CollisionConfig;
use crate::io::{AlertsHeader, PredHeader, RecordingHeader, FORMAT_VERSION};
use crate::pipeline::{Pipeline, PipelineConfig};
use crate::predict::{CvKalmanPredictor, PredictError, Predictor, SaturatingCvPredictor};
use crate::preprocess::{step_seconds, SmootherConfig, SmoothingMode};
use crate::scenario::{NoiseSpec, Preset, ScenarioError, ScenarioSpec};
use crate::tracking::TrackerConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid value for {key}: {msg}")]
    Invalid { key: String, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    Off,
    Causal,
    Batch,
}

impl From<Smoothing> for SmoothingMode {
    fn from(s: Smoothing) -> Self {
        match s {
            Smoothing::Off => SmoothingMode::Off,
            Smoothing::Causal => SmoothingMode::Causal,
            Smoothing::Batch => SmoothingMode::Batch,
        }
    }
}

impl Smoothing {
    pub fn as_str(&self) -> &'static str {
        match self {
            Smoothing::Off => "off",
            Smoothing::Causal => "causal",
            Smoothing::Batch => "batch",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    Cv,
    SaturatingCv,
}

impl PredictorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PredictorKind::Cv => "cv",
            PredictorKind::SaturatingCv => "saturating-cv",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // tracking
    pub high_thresh: f64,
    pub low_thresh: f64,
    pub iou_thresh: f64,
    pub confirm_hits: u32,
    pub max_misses: u32,
    // smoothing
    pub smoothing: Smoothing,
    pub sigma_a: f64,
    pub sigma_m: f64,
    // prediction
    pub predictor: PredictorKind,
    pub observe_window: usize,
    pub horizon: usize,
    pub max_speed: f64,
    // collision
    pub radius: f64,
    pub urgent_ttc: f64,
    pub clear_frames: u32,
    // evaluation
    pub match_tolerance: f64,
    pub assoc_gate: f64,
    // scenario
    pub preset: Preset,
    pub seed: u64,
    pub duration: Option<f64>,
    pub noiseless: bool,
    pub depth_sigma_near: Option<f64>,
    pub depth_sigma_far: Option<f64>,
    pub pixel_jitter: Option<f64>,
    pub dropout: Option<f64>,
    pub confidence_sigma: Option<f64>,
    // streaming
    pub rate: f64,
    pub budget_ms: Option<f64>,
    pub slowdown_ms: f64,
    // paths
    pub spec: Option<PathBuf>,
    pub rec: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub alerts: Option<PathBuf>,
    pub pred: Option<PathBuf>,
    pub latency: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            high_thresh: 0.5,
            low_thresh: 0.1,
            iou_thresh: 0.3,
            confirm_hits: 3,
            max_misses: 30,
            smoothing: Smoothing::Causal,
            sigma_a: 0.5,
            sigma_m: 0.1,
            predictor: PredictorKind::Cv,
            observe_window: 6,
            horizon: 12,
            max_speed: 1.5,
            radius: 0.5,
            urgent_ttc: 1.6,
            clear_frames: 8,
            match_tolerance: 0.4,
            assoc_gate: 1.0,
            preset: Preset::Easy,
            seed: 0,
            duration: None,
            noiseless: false,
            depth_sigma_near: None,
            depth_sigma_far: None,
            pixel_jitter: None,
            dropout: None,
            confidence_sigma: None,
            rate: 1.0,
            budget_ms: None,
            slowdown_ms: 0.0,
            spec: None,
            rec: None,
            truth: None,
            alerts: None,
            pred: None,
            latency: None,
            plot: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Overrides one key from its textual value. Values that do not parse as
    /// a TOML literal are taken as strings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let mut table = toml::Table::try_from(&*self).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        table.insert(key.to_string(), parsed);
        let updated: Self = table.try_into().map_err(|e: toml::de::Error| ConfigError::Invalid {
            key: key.to_string(),
            msg: e.message().to_string(),
        })?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, msg: &str| {
            Err(ConfigError::Invalid {
                key: key.into(),
                msg: msg.into(),
            })
        };
        if !(0.0..=1.0).contains(&self.low_thresh) || !(0.0..=1.0).contains(&self.high_thresh) {
            return bad("high_thresh", "thresholds must lie in [0, 1]");
        }
        if self.low_thresh > self.high_thresh {
            return bad("low_thresh", "must not exceed high_thresh");
        }
        if !(self.iou_thresh > 0.0 && self.iou_thresh <= 1.0) {
            return bad("iou_thresh", "must lie in (0, 1]");
        }
        if self.confirm_hits == 0 || self.max_misses == 0 {
            return bad("confirm_hits", "confirm_hits and max_misses must be positive");
        }
        if !(self.sigma_a > 0.0 && self.sigma_m > 0.0) {
            return bad("sigma_a", "noise scales must be positive");
        }
        if self.observe_window < 2 {
            return bad("observe_window", "must be at least 2");
        }
        if self.horizon < 1 {
            return bad("horizon", "must be at least 1");
        }
        if !(self.max_speed > 0.0) {
            return bad("max_speed", "must be positive");
        }
        if !(self.radius > 0.0) {
            return bad("radius", "must be positive");
        }
        if !(self.urgent_ttc >= 0.0) {
            return bad("urgent_ttc", "must be non-negative");
        }
        if !(self.match_tolerance >= 0.0) || !(self.assoc_gate > 0.0) {
            return bad("match_tolerance", "tolerances must be non-negative");
        }
        if !(self.rate >= 0.0) {
            return bad("rate", "must be non-negative");
        }
        if self.budget_ms.is_some_and(|b| !(b > 0.0)) {
            return bad("budget_ms", "must be positive");
        }
        if !(self.slowdown_ms >= 0.0) {
            return bad("slowdown_ms", "must be non-negative");
        }
        if self.duration.is_some_and(|d| !(d > 0.0)) {
            return bad("duration", "must be positive");
        }
        Ok(())
    }

    pub fn tracker(&self) -> TrackerConfig<f64> {
        TrackerConfig {
            high_thresh: self.high_thresh,
            low_thresh: self.low_thresh,
            iou_thresh: self.iou_thresh,
            confirm_hits: self.confirm_hits,
            max_misses: self.max_misses,
        }
    }

    pub fn smoother(&self) -> SmootherConfig<f64> {
        SmootherConfig {
            sigma_a: self.sigma_a,
            sigma_m: self.sigma_m,
            mode: self.smoothing.into(),
        }
    }

    pub fn collision(&self) -> CollisionConfig<f64> {
        CollisionConfig {
            radius: self.radius,
            urgent_ttc: self.urgent_ttc,
            clear_frames: self.clear_frames,
        }
    }

    pub fn build_predictor(&self) -> Result<Box<dyn Predictor<f64>>, PredictError> {
        Ok(match self.predictor {
            PredictorKind::Cv => Box::new(CvKalmanPredictor::new(
                self.observe_window,
                self.horizon,
                self.sigma_a,
                self.sigma_m,
            )?),
            PredictorKind::SaturatingCv => Box::new(SaturatingCvPredictor::new(
                self.observe_window,
                self.horizon,
                self.sigma_a,
                self.sigma_m,
                self.max_speed,
            )?),
        })
    }

    pub fn pipeline_config(&self, native_fps: f64) -> PipelineConfig<f64> {
        PipelineConfig {
            tracker: self.tracker(),
            smoother: self.smoother(),
            collision: self.collision(),
            native_fps,
            dump: true,
            keep_tracks: false,
        }
    }

    /// Pipeline for a recording with the given header.
    pub fn build_pipeline(&self, header: &RecordingHeader) -> Result<Pipeline<f64>, ConfigError> {
        let predictor = self.build_predictor().map_err(|e| ConfigError::Invalid {
            key: "predictor".into(),
            msg: e.to_string(),
        })?;
        Pipeline::new(self.pipeline_config(header.native_fps), header.intrinsics, predictor).map_err(|e| {
            ConfigError::Invalid {
                key: "native_fps".into(),
                msg: e.to_string(),
            }
        })
    }

    pub fn alerts_header(&self) -> AlertsHeader {
        AlertsHeader {
            format_version: FORMAT_VERSION,
            radius: self.radius,
            urgent_ttc: self.urgent_ttc,
            clear_frames: self.clear_frames,
            horizon_seconds: self.horizon as f64 * step_seconds::<f64>(),
        }
    }

    pub fn pred_header(&self) -> PredHeader {
        PredHeader {
            format_version: FORMAT_VERSION,
            step: step_seconds(),
            observe_window: self.observe_window,
            horizon: self.horizon,
            predictor: self.predictor.as_str().into(),
            smoothing: self.smoothing.as_str().into(),
        }
    }

    /// Applies the noise keys on top of a preset's noise model.
    pub fn noise(&self, base: &NoiseSpec) -> NoiseSpec {
        let mut n = if self.noiseless { NoiseSpec::noiseless() } else { base.clone() };
        if let Some(v) = self.depth_sigma_near {
            n.depth_rel_sigma_near = v;
        }
        if let Some(v) = self.depth_sigma_far {
            n.depth_rel_sigma_far = v;
        }
        if let Some(v) = self.pixel_jitter {
            n.pixel_jitter_sigma = v;
        }
        if let Some(v) = self.dropout {
            n.dropout = v;
        }
        if let Some(v) = self.confidence_sigma {
            n.confidence.sigma = v;
        }
        n
    }

    /// Scenario described by the preset, seed, duration and noise keys.
    pub fn scenario(&self) -> Result<ScenarioSpec, ScenarioError> {
        let mut spec = ScenarioSpec::preset(self.preset, self.seed, self.duration);
        spec.noise = self.noise(&spec.noise);
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let d = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&d.to_toml()).unwrap(), d);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("radiuss = 0.4").is_err());
    }

    #[test]
    fn set_overrides_typed_keys() {
        let mut c = RunConfig::default();
        c.set("radius", "0.75").unwrap();
        c.set("smoothing", "batch").unwrap();
        c.set("predictor", "saturating-cv").unwrap();
        c.set("out", "/tmp/x").unwrap();
        c.set("seed", "42").unwrap();
        assert_eq!(c.radius, 0.75);
        assert_eq!(c.smoothing, Smoothing::Batch);
        assert_eq!(c.predictor, PredictorKind::SaturatingCv);
        assert_eq!(c.out, Some(PathBuf::from("/tmp/x")));
        assert_eq!(c.seed, 42);
        assert!(c.set("nope", "1").is_err());
        assert!(c.set("radius", "-1").is_err());
        assert!(c.set("smoothing", "sometimes").is_err());
        assert_eq!(c.radius, 0.75);
    }

    #[test]
    fn noise_overrides() {
        let c = RunConfig {
            noiseless: true,
            dropout: Some(0.1),
            ..RunConfig::default()
        };
        let n = c.noise(&NoiseSpec::stereo_default());
        assert_eq!(n.depth_rel_sigma_near, 0.0);
        assert_eq!(n.dropout, 0.1);
    }
}
