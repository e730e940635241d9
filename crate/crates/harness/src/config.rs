//! Pipeline configuration, loadable from TOML.

use std::path::Path;

use mifi_core::diarize::DiarConfig;
use mifi_core::gate::GateThresholds;
use mifi_core::report::ReportConfig;
use mifi_core::segment::SegmenterConfig;
use mifi_core::vad::VadConfig;
use serde::{Deserialize, Serialize};

/// Environment variable naming the configuration file.
pub const CONFIG_ENV: &str = "MIFI_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub vad: VadConfig,
    pub gate: GateThresholds,
    pub diarize: DiarConfig,
    /// Leading feature dimensions ignored by the speaker embedder.
    pub embed_skip_dims: usize,
    pub segmenter: SegmenterConfig,
    pub report: ReportConfig,
    pub in_domain_weight: f64,
    /// Worker threads for batch runs; 0 uses every core.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            // the energy-quantile detector needs a quantile below the
            // session's silence share
            vad: VadConfig {
                threshold_quantile: 0.05,
                ..VadConfig::default()
            },
            gate: GateThresholds::default(),
            diarize: DiarConfig::default(),
            embed_skip_dims: 1,
            segmenter: SegmenterConfig::default(),
            report: ReportConfig::default(),
            in_domain_weight: 0.8,
            workers: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("{0}: {1}")]
    Parse(String, toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(name.clone(), e))?;
        let cfg = Self::from_toml(&text).map_err(|e| ConfigError::Parse(name, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |e: String| ConfigError::Invalid(e);
        self.vad.validate().map_err(|e| inv(e.to_string()))?;
        self.gate.validate().map_err(inv)?;
        self.diarize.validate().map_err(|e| inv(e.to_string()))?;
        self.segmenter.validate().map_err(|e| inv(e.to_string()))?;
        self.report.benchmarks.validate().map_err(inv)?;
        if !(0.0..=1.0).contains(&self.in_domain_weight) {
            return Err(inv(format!("in_domain_weight {} outside [0, 1]", self.in_domain_weight)));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_partial_files() {
        let cfg = PipelineConfig::default();
        let back = PipelineConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        let partial = PipelineConfig::from_toml("[gate]\nmin_duration = 30.0\n").unwrap();
        assert_eq!(partial.gate.min_duration, 30.0);
        assert_eq!(partial.gate.max_duration, GateThresholds::default().max_duration);
        let partial = PipelineConfig::from_toml("workers = 2\n[segmenter]\npause_split = 0.8\nmax_tokens = 40\n").unwrap();
        assert_eq!(partial.workers, 2);
        assert_eq!(partial.segmenter.max_tokens, 40);
        assert_eq!(partial.gate, GateThresholds::default());
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = PipelineConfig::default();
        cfg.vad.median_taps = 4;
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.gate.min_duration = 1e6;
        assert!(cfg.validate().is_err());
    }
}
