//! Run configuration read from TOML. Every block rejects unknown keys.

use std::path::Path;

use grainfield::limits::TruncationOptions;
use grainfield::sampling::DEFAULT_GRAIN_CAP;
use grainfield::{GrainShape, ModelParams, Usage};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const OUTPUT_DIR_ENV: &str = "GRAINFIELD_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "grainfield-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub scenario: ScenarioBlock,
    #[serde(default)]
    pub execution: ExecutionBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grain {
    Square,
    Disk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub alpha: f64,
    pub p: f64,
    #[serde(default = "one")]
    pub r_min: f64,
    #[serde(default = "square")]
    pub grain: Grain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Field,
    Workload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmallGrainMode {
    Exact,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBlock {
    #[serde(default = "field")]
    pub kind: ScenarioKind,
    #[serde(default = "one")]
    pub gamma: f64,
    /// Sweep for `scan-gamma`.
    #[serde(default)]
    pub gammas: Vec<f64>,
    /// Rate cap exponent; absent means no cap.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    /// Workload horizon.
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "unit_grid")]
    pub xs: Vec<f64>,
    #[serde(default = "unit_grid")]
    pub ys: Vec<f64>,
    /// `(t, s)` lags for `covariance`.
    #[serde(default)]
    pub lags: Vec<[f64; 2]>,
    /// Independent realizations per lag set for `covariance`.
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "exact")]
    pub small_grains: SmallGrainMode,
    #[serde(default = "default_small_target")]
    pub small_grain_target: f64,
    #[serde(default)]
    pub truncation: TruncationBlock,
}

impl Default for ScenarioBlock {
    fn default() -> Self {
        toml::from_str("").expect("scenario defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationBlock {
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default = "default_target_points")]
    pub target_points: f64,
    #[serde(default = "default_max_points")]
    pub max_points: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl Default for TruncationBlock {
    fn default() -> Self {
        let d = TruncationOptions::default();
        TruncationBlock {
            epsilon: d.epsilon,
            r_max: d.r_max,
            target_points: d.target_points,
            max_points: d.max_points,
            tolerance: d.tolerance,
        }
    }
}

impl TruncationBlock {
    pub fn options(&self) -> TruncationOptions {
        TruncationOptions {
            epsilon: self.epsilon,
            r_max: self.r_max,
            target_points: self.target_points,
            max_points: self.max_points,
            tolerance: self.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutionBlock {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Worker threads; 0 means available parallelism.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_cap")]
    pub grain_cap: u64,
}

impl Default for ExecutionBlock {
    fn default() -> Self {
        toml::from_str("").expect("execution defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        toml::from_str("").expect("output defaults")
    }
}

fn one() -> f64 {
    1.0
}
fn square() -> Grain {
    Grain::Square
}
fn field() -> ScenarioKind {
    ScenarioKind::Field
}
fn exact() -> SmallGrainMode {
    SmallGrainMode::Exact
}
fn default_lambdas() -> Vec<f64> {
    vec![16.0, 32.0, 64.0, 128.0]
}
fn default_t() -> f64 {
    512.0
}
fn unit_grid() -> Vec<f64> {
    vec![1.0]
}
fn default_points() -> usize {
    100_000
}
fn default_small_target() -> f64 {
    4000.0
}
fn default_target_points() -> f64 {
    TruncationOptions::default().target_points
}
fn default_max_points() -> f64 {
    TruncationOptions::default().max_points
}
fn default_tolerance() -> f64 {
    TruncationOptions::default().tolerance
}
fn default_seed() -> u64 {
    1
}
fn default_replicates() -> usize {
    100
}
fn default_cap() -> u64 {
    DEFAULT_GRAIN_CAP
}
fn default_dir() -> String {
    DEFAULT_OUTPUT_DIR.to_string()
}
fn default_formats() -> Vec<String> {
    vec!["csv".to_string()]
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn check(&self) -> Result<(), CliError> {
        if let Some(f) = self.output.formats.iter().find(|f| f.as_str() != "csv") {
            return Err(CliError::Config(format!(
                "unsupported output format {f:?}; only csv is available"
            )));
        }
        if self.execution.replicates == 0 {
            return Err(CliError::Config("execution.replicates must be positive".into()));
        }
        if let Some(b) = self.scenario.beta {
            if !(b > 0.0) {
                return Err(CliError::Config(format!("scenario.beta must be positive, got {b}")));
            }
        }
        Ok(())
    }

    pub fn usage(&self) -> Usage {
        match self.scenario.kind {
            ScenarioKind::Field => Usage::Field,
            ScenarioKind::Workload => Usage::Workload,
        }
    }

    pub fn params(&self) -> grainfield::Result<ModelParams> {
        let grain = match self.model.grain {
            Grain::Square => GrainShape::UnitSquare,
            Grain::Disk => GrainShape::UnitDisk,
        };
        ModelParams::validate(self.model.alpha, self.model.p, self.model.r_min, grain, self.usage())
    }

    pub fn beta(&self) -> f64 {
        self.scenario.beta.unwrap_or(f64::INFINITY)
    }

    /// Applies the output-directory environment override.
    pub fn resolve_output(&mut self) {
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                self.output.directory = dir;
            }
        }
    }

    pub fn grid_points(&self) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(self.scenario.xs.len() * self.scenario.ys.len());
        for &x in &self.scenario.xs {
            for &y in &self.scenario.ys {
                pts.push((x, y));
            }
        }
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::from_toml("[model]\nalpha = 1.5\np = 0.5\n").unwrap();
        assert_eq!(cfg.model.r_min, 1.0);
        assert_eq!(cfg.scenario.kind, ScenarioKind::Field);
        assert_eq!(cfg.execution.replicates, 100);
        assert_eq!(cfg.output.formats, vec!["csv"]);
        assert_eq!(cfg.beta(), f64::INFINITY);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            "[model]\nalpha = 1.5\np = 0.5\nshape = 2\n",
            "[model]\nalpha = 1.5\np = 0.5\n[execution]\nthread = 2\n",
            "[model]\nalpha = 1.5\np = 0.5\n[extra]\n",
            "[model]\nalpha = 1.5\np = 0.5\n[scenario.truncation]\neps = 0.1\n",
        ] {
            assert!(matches!(RunConfig::from_toml(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = RunConfig::from_toml(
            "[model]\nalpha = 1.9\np = 0.5\ngrain = \"disk\"\n[scenario]\nkind = \"workload\"\nbeta = 0.5\nlags = [[0.5, 0.0]]\n",
        )
        .unwrap();
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn only_csv_output() {
        let text = "[model]\nalpha = 1.5\np = 0.5\n[output]\nformats = [\"parquet\"]\n";
        assert!(RunConfig::from_toml(text).is_err());
    }
}
