use std::path::Path;

use cloudreg::eval::{OdometryNoise, SceneParams, SuccessCriteria};
use cloudreg::pipeline::{PipelineParams, RealizationConfig};

use crate::{BenchError, Result};

/// Success thresholds on top of the baseline errors.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuccessParams {
    pub t_threshold_m: f64,
    pub r_threshold_deg: f64,
    /// Fraction of successful seeds that makes a scan count reliable.
    pub reliability: f64,
}

impl Default for SuccessParams {
    fn default() -> Self {
        let d = SuccessCriteria::default();
        Self { t_threshold_m: d.t_threshold, r_threshold_deg: d.r_threshold.to_degrees(), reliability: d.reliability }
    }
}

impl SuccessParams {
    pub fn criteria(&self, baseline: (f64, f64)) -> SuccessCriteria {
        SuccessCriteria {
            t_threshold: self.t_threshold_m,
            r_threshold: self.r_threshold_deg.to_radians(),
            baseline,
            reliability: self.reliability,
        }
    }
}

/// Benchmark settings read from TOML. Every section is optional and every
/// unknown key is an error.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub scene: SceneParams,
    pub odometry: OdometryNoise,
    /// Stage parameters applied to every realization.
    pub pipeline: PipelineParams,
    pub success: SuccessParams,
    /// Margin added around the local-map bounds when cropping the global map.
    pub crop_margin: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            scene: SceneParams::default(),
            odometry: OdometryNoise::default(),
            pipeline: PipelineParams::default(),
            success: SuccessParams::default(),
            crop_margin: 2.0,
        }
    }
}

impl BenchConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let config: BenchConfig = parse_toml(path)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.pipeline.validate()?;
        let s = &self.success;
        let ok = s.t_threshold_m >= 0.0
            && s.r_threshold_deg >= 0.0
            && s.reliability > 0.0
            && s.reliability <= 1.0
            && self.crop_margin >= 0.0
            && self.odometry.sigma_translation >= 0.0
            && self.odometry.sigma_rotation_deg >= 0.0;
        if !ok {
            return Err(BenchError::Config("success thresholds, crop margin and odometry noise must be non-negative, reliability in (0, 1]".into()));
        }
        Ok(())
    }
}

/// A realization from a TOML file in the serialized `RealizationConfig` form.
pub fn load_realization(path: &Path) -> Result<RealizationConfig> {
    let config: RealizationConfig = parse_toml(path)?;
    cloudreg::pipeline::Registry::builtin().validate(&config)?;
    Ok(config)
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io { path: path.into(), source: e })?;
    toml::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
}
