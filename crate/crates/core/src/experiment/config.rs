use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{AqConfig, BinaryRoiConfig};
use crate::error::{Error, Result};
use crate::frames::SceneConfig;
use crate::oracle::DetectorConfig;
use crate::rer::TrainerConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub uniform: bool,
    pub binary: bool,
    pub variance_aq: bool,
    pub binary_roi: BinaryRoiConfig,
    pub aq: AqConfig,
    /// Base-QP search range for the AQ baseline, scanned from high to low.
    pub aq_max_base: u8,
    pub aq_min_base: u8,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            uniform: true,
            binary: true,
            variance_aq: true,
            binary_roi: BinaryRoiConfig::default(),
            aq: AqConfig::default(),
            aq_max_base: 45,
            aq_min_base: 6,
        }
    }
}

/// Everything a CLI run needs. Loaded from TOML; missing keys take defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub scenes: usize,
    pub frames_per_scene: usize,
    /// Re-run emphasis prediction every `interval` frames of a sequence.
    pub interval: usize,
    pub out_dir: PathBuf,
    pub scene: SceneConfig,
    pub trainer: TrainerConfig,
    pub detector: DetectorConfig,
    pub baselines: BaselineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            scenes: 20,
            frames_per_scene: 1,
            interval: 1,
            out_dir: PathBuf::from("out"),
            scene: SceneConfig::default(),
            trainer: TrainerConfig::default(),
            detector: DetectorConfig::default(),
            baselines: BaselineConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.interval == 0 {
            return Err(Error::invalid_config("interval must be at least 1"));
        }
        if self.frames_per_scene == 0 {
            return Err(Error::invalid_config("frames_per_scene must be at least 1"));
        }
        if self.scenes == 0 {
            return Err(Error::invalid_config("scenes must be at least 1"));
        }
        let b = &self.baselines;
        if b.aq_min_base > b.aq_max_base || b.aq_min_base < 6 || b.aq_max_base > 45 {
            return Err(Error::invalid_config("AQ base QP range must lie within [6, 45]"));
        }
        if b.aq.clamp < 0 {
            return Err(Error::invalid_config("AQ clamp must be non-negative"));
        }
        if b.binary_roi.qp_high_quality >= b.binary_roi.qp_low_quality {
            return Err(Error::invalid_config("binary RoI QP must be below the background QP"));
        }
        self.scene.validate()?;
        self.trainer.validate()?;
        self.detector.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
