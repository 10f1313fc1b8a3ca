//! Scenario configuration, read from TOML with one section per subsystem.
//!
//! Every section is optional and falls back to defaults; unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::devices::{CalibrationCurve, CalibrationTable, DeviceError, FiberChannel, LcvrChannel, LcvrStack};
use crate::optimizer::SearchConfig;
use crate::qkd::DetectionConfig;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    #[default]
    Optimize,
    DriftLog,
    Batch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub kind: ScenarioKind,
    pub seed: u64,
    /// Simulated seconds per run.
    pub duration: f64,
    pub batch_size: usize,
    /// Output files are written as `<prefix>.csv`, `<prefix>_summary.csv`, ...
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_prefix: Option<String>,
    /// Sampling period of drift-log rows, simulated seconds.
    pub drift_log_period: f64,
    /// Converged means best estimate <= qber_threshold + this margin.
    pub convergence_margin: f64,
    /// Iteration budget for a batch run to count as a success.
    pub success_iterations: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            kind: ScenarioKind::Optimize,
            seed: 1,
            duration: 1200.0,
            batch_size: 100,
            output_prefix: None,
            drift_log_period: 60.0,
            convergence_margin: 0.02,
            success_iterations: 50,
        }
    }
}

/// Deployed-fiber parameters. The starting rotation is Haar-random, redrawn
/// until the uncompensated QBER is at least `min_initial_qber`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberSection {
    pub loss_db: f64,
    pub length_km: f64,
    pub drift_sigma: f64,
    pub jump_rate: f64,
    pub jump_angle_scale: f64,
    pub min_initial_qber: f64,
    /// Also draw a random static rotation for Alice's local patchcord.
    pub random_local_arm: bool,
}

impl Default for FiberSection {
    fn default() -> Self {
        let f = FiberChannel::default();
        FiberSection {
            loss_db: f.loss_db,
            length_km: f.length_km,
            drift_sigma: f.drift_sigma,
            jump_rate: f.jump_rate,
            jump_angle_scale: f.jump_angle_scale,
            min_initial_qber: 0.4,
            random_local_arm: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    /// Pair rate before the link loss. When set, the coincidence rate becomes
    /// `pair_rate * 10^(-loss_db / 10)` and overrides `detection.coincidence_rate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_rate: Option<f64>,
}

/// Calibration table file for one channel (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub channel: usize,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LcvrSection {
    pub channels: [LcvrChannel; 4],
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub calibration_file: Vec<CalibrationFile>,
}

impl Default for LcvrSection {
    fn default() -> Self {
        LcvrSection {
            channels: LcvrStack::default().channels,
            calibration_file: Vec::new(),
        }
    }
}

/// Scripted fiber jump used to test recovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceSection {
    /// Apply the jump right before this iteration starts (1-based).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at_iteration: Option<u64>,
    /// Rise in true QBER at the current center that the jump should cause.
    pub qber_increase: f64,
}

impl Default for DisturbanceSection {
    fn default() -> Self {
        DisturbanceSection {
            at_iteration: None,
            qber_increase: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub run: RunSection,
    pub fiber: FiberSection,
    pub source: SourceSection,
    pub lcvr: LcvrSection,
    pub detection: DetectionConfig,
    pub search: SearchConfig,
    pub disturbance: DisturbanceSection,
    /// Directory relative calibration paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn field_err(path: &str, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config {
        field: path.to_string(),
        message: e.to_string(),
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config {
            field: e
                .span()
                .map(|s| format!("byte {}..{}", s.start, s.end))
                .unwrap_or_else(|| "<document>".into()),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    /// Checks every field against the invariants of the module that owns it.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let r = &self.run;
        if !(r.duration.is_finite() && r.duration > 0.0) {
            return Err(field_err("run.duration", "must be > 0"));
        }
        if r.batch_size < 1 {
            return Err(field_err("run.batch_size", "must be >= 1"));
        }
        if !(r.drift_log_period.is_finite() && r.drift_log_period > 0.0) {
            return Err(field_err("run.drift_log_period", "must be > 0"));
        }
        if !(r.convergence_margin >= 0.0 && r.convergence_margin <= 1.0) {
            return Err(field_err("run.convergence_margin", "must be in [0, 1]"));
        }
        let f = &self.fiber;
        if !(f.loss_db.is_finite() && f.loss_db >= 0.0) {
            return Err(field_err("fiber.loss_db", "must be >= 0"));
        }
        if !(f.length_km.is_finite() && f.length_km >= 0.0) {
            return Err(field_err("fiber.length_km", "must be >= 0"));
        }
        if !(f.drift_sigma.is_finite() && f.drift_sigma >= 0.0) {
            return Err(field_err("fiber.drift_sigma", "must be >= 0"));
        }
        if !(f.jump_rate.is_finite() && f.jump_rate >= 0.0) {
            return Err(field_err("fiber.jump_rate", "must be >= 0"));
        }
        if !(f.jump_angle_scale.is_finite() && f.jump_angle_scale >= 0.0) {
            return Err(field_err("fiber.jump_angle_scale", "must be >= 0"));
        }
        if !(0.0..0.9).contains(&f.min_initial_qber) {
            return Err(field_err("fiber.min_initial_qber", "must be in [0, 0.9)"));
        }
        if let Some(rate) = self.source.pair_rate {
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(field_err("source.pair_rate", "must be >= 0"));
            }
        }
        for (i, ch) in self.lcvr.channels.iter().enumerate() {
            ch.validate().map_err(|e| field_err(&format!("lcvr.channels[{i}]"), e))?;
        }
        for (i, cf) in self.lcvr.calibration_file.iter().enumerate() {
            if cf.channel >= 4 {
                return Err(field_err(&format!("lcvr.calibration_file[{i}].channel"), "must be 0..=3"));
            }
        }
        self.detection.validate().map_err(|e| field_err("detection", e))?;
        self.search.validate().map_err(|e| field_err("search", e))?;
        for (i, ch) in self.lcvr.channels.iter().enumerate() {
            let [lo, hi] = self.search.bounds[i];
            if lo < ch.v_min || hi > ch.v_max {
                return Err(field_err(
                    &format!("search.bounds[{i}]"),
                    format!("must lie within channel range [{}, {}]", ch.v_min, ch.v_max),
                ));
            }
        }
        let d = &self.disturbance;
        if !(d.qber_increase.is_finite() && d.qber_increase > 0.0 && d.qber_increase < 0.5) {
            return Err(field_err("disturbance.qber_increase", "must be in (0, 0.5)"));
        }
        if d.at_iteration == Some(0) {
            return Err(field_err("disturbance.at_iteration", "iterations are 1-based"));
        }
        Ok(())
    }

    /// Stack with calibration files loaded in.
    pub fn resolved_stack(&self) -> Result<LcvrStack, HarnessError> {
        let mut stack = LcvrStack { channels: self.lcvr.channels.clone() };
        for (i, cf) in self.lcvr.calibration_file.iter().enumerate() {
            let mut path = PathBuf::from(&cf.path);
            if path.is_relative() {
                if let Some(base) = &self.base_dir {
                    path = base.join(path);
                }
            }
            let table = CalibrationTable::load(&path).map_err(|e| match e {
                DeviceError::Io { path, message } => HarnessError::Io { path, message },
                e => field_err(&format!("lcvr.calibration_file[{i}]"), e),
            })?;
            stack.channels[cf.channel].curve = CalibrationCurve::Table(table);
            stack.channels[cf.channel]
                .validate()
                .map_err(|e| field_err(&format!("lcvr.calibration_file[{i}]"), e))?;
        }
        Ok(stack)
    }

    /// Detection parameters after applying the optional source rate and loss.
    pub fn effective_detection(&self) -> DetectionConfig {
        let mut d = self.detection.clone();
        if let Some(rate) = self.source.pair_rate {
            d.coincidence_rate = rate * 10f64.powf(-self.fiber.loss_db / 10.0);
        }
        d
    }
}
