//! Declarative run configuration (TOML). Unknown keys are rejected; every
//! omitted key takes its documented default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::PipelineConfig;
use crate::dataset::FrameLayout;
use crate::error::{Error, Result};
use crate::segment::SegmentParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutName {
    #[default]
    Msr20,
    Msr40,
}

impl LayoutName {
    pub fn layout(self) -> FrameLayout {
        match self {
            LayoutName::Msr20 => FrameLayout::msr20(),
            LayoutName::Msr40 => FrameLayout::msr40(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub layout: LayoutName,
    pub train_fraction: f64,
    pub split_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            layout: LayoutName::Msr20,
            train_fraction: 0.8,
            split_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// When set, every stage seed is derived from this one.
    pub seed: Option<u64>,
    pub data: DataConfig,
    pub pipeline: PipelineConfig,
    pub segment: SegmentParams,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        if !(0.0..=1.0).contains(&self.data.train_fraction) {
            return Err(Error::Config("data.train_fraction must lie in [0, 1]".into()));
        }
        self.effective_pipeline().validate().map_err(wrap)?;
        self.segment.validate().map_err(wrap)
    }

    /// Pipeline settings with the master seed applied.
    pub fn effective_pipeline(&self) -> PipelineConfig {
        match self.seed {
            Some(s) => self.pipeline.clone().with_seed(s),
            None => self.pipeline.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::from_toml_str("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(
            RunConfig::from_toml_str("[pipeline.first_map]\nrowz = 3"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn nested_values_and_round_trip() {
        let cfg = RunConfig::from_toml_str(
            "seed = 4\n[pipeline]\nkey_points = 12\n[pipeline.first_map]\nkind = \"gg\"\n[pipeline.first_map.gg]\nlambda = 10\n",
        )
        .unwrap();
        assert_eq!(cfg.pipeline.key_points, 12);
        assert_eq!(cfg.pipeline.first_map.gg.lambda, 10);
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml_str("[data]\ntrain_fraction = 1.5").is_err());
        assert!(RunConfig::from_toml_str("[pipeline.first_map.som]\nalpha0 = 2.0").is_err());
    }
}
