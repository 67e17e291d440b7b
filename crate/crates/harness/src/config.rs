//! Run configuration and the two named presets.
//!
//! `paper-exact` keeps the full-size architecture and batch size; `desk`
//! shrinks inputs, counts and epochs until a single CPU finishes in minutes.
//! Every field can be overridden from a JSON file; missing fields fall back
//! to the `desk` values.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use escher_baselines::svm::SvmConfig;
use escher_core::augment::AugmentPolicy;
use escher_core::gen::GenConfig;
use escher_core::group::WallpaperGroup;
use escher_net::train::TrainConfig;
use escher_net::ModelConfig;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    PaperExact,
    Desk,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Self::PaperExact => "paper-exact",
            Self::Desk => "desk",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "paper-exact" => Ok(Self::PaperExact),
            "desk" => Ok(Self::Desk),
            _ => Err(HarnessError::Usage(format!("unknown preset {s:?} (paper-exact, desk)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub preset: Preset,
    pub gen: GenConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Augmentation applied to training and test views.
    pub policy: AugmentPolicy,
    /// Draw fresh augmentations of the training sources every epoch.
    pub reaugment: bool,
    pub groups: Vec<WallpaperGroup>,
    pub train_per_group: usize,
    pub test_per_group: usize,
    pub eval_batch: usize,
    pub sweep_counts: Vec<usize>,
    /// Patch sides in source pixels.
    pub patch_sizes: Vec<usize>,
    pub patch_images: usize,
    pub scale_cycles: Vec<f64>,
    pub svm: SvmConfig,
    pub avr_select: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::PaperExact => Self::paper_exact(),
            Preset::Desk => Self::desk(),
        }
    }

    pub fn paper_exact() -> Self {
        Self {
            preset: Preset::PaperExact,
            model: ModelConfig::paper_exact(),
            train: TrainConfig { batch_size: 250, epochs: 200, ..TrainConfig::default() },
            train_per_group: 75,
            test_per_group: 100,
            sweep_counts: vec![10, 15, 20, 25, 30, 50, 75, 100],
            patch_images: 100,
            ..Self::desk()
        }
    }

    pub fn desk() -> Self {
        Self {
            preset: Preset::Desk,
            gen: GenConfig::default(),
            model: ModelConfig::reduced(),
            train: TrainConfig { batch_size: 10, epochs: 40, ..TrainConfig::default() },
            policy: AugmentPolicy::All,
            reaugment: true,
            groups: WallpaperGroup::ALL.to_vec(),
            train_per_group: 25,
            test_per_group: 20,
            eval_batch: 50,
            sweep_counts: vec![10, 15, 20, 25],
            patch_sizes: (0..=24).step_by(3).collect(),
            patch_images: 20,
            scale_cycles: (2..=8).map(f64::from).collect(),
            svm: SvmConfig::default(),
            avr_select: escher_baselines::avr::DEFAULT_SELECT,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.gen.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.groups.is_empty() {
            return Err(HarnessError::Usage("no groups selected".into()));
        }
        if self.model.classes != escher_core::group::NUM_GROUPS {
            return Err(HarnessError::Usage(format!("model must have 17 outputs, has {}", self.model.classes)));
        }
        crate::data::downsample_steps(self.model.input)?;
        if self.eval_batch == 0 {
            return Err(HarnessError::Usage("eval_batch must be positive".into()));
        }
        Ok(())
    }
}
