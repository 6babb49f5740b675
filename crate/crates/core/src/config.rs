//! Experiment configuration. Every field has a default, so a config file only
//! needs to name the regime; unknown fields are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{CsvSources, SplitSpec, SyntheticSpec};
use crate::error::{Error, Result};
use crate::federation::RegimeKind;
use crate::losses::DEFAULT_TEMPERATURE;
use crate::nn::DEFAULT_LEAKY_SLOPE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub regime: RegimeKind,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Report of a centralized run to measure accuracy gaps against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_report: Option<PathBuf>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub model: ModelSettings,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub federation: FederationConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataConfig {
    Synthetic(SyntheticSpec),
    Csv(CsvConfig),
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig::Synthetic(SyntheticSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combined_path: Option<PathBuf>,
    #[serde(default = "default_classes")]
    pub class_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
}

fn default_classes() -> usize {
    9
}

impl CsvConfig {
    pub fn sources(&self) -> Result<CsvSources> {
        match (
            &self.image_path,
            &self.audio_path,
            &self.label_path,
            &self.combined_path,
        ) {
            (Some(i), Some(a), Some(l), None) => Ok(CsvSources::Separate {
                image_path: i.clone(),
                audio_path: a.clone(),
                label_path: l.clone(),
            }),
            (None, None, None, Some(c)) => Ok(CsvSources::Combined {
                combined_path: c.clone(),
            }),
            _ => Err(Error::config(
                "csv data needs either image_path, audio_path and label_path, or combined_path",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSettings {
    pub scale: f64,
    pub leaky_slope: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            scale: 0.25,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub global_epochs: usize,
    pub learning_rate: f64,
    /// Mini-batch size of centralized training.
    pub batch_size: usize,
    pub temperature: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            global_epochs: 100,
            learning_rate: 0.001,
            batch_size: 10,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FederationConfig {
    /// Participants per group.
    pub participants: usize,
    pub local_epochs: usize,
    pub local_batch: usize,
    /// Floor on participant sample counts in the unbalanced regimes. When
    /// unset it is 50 samples per 13800 training samples, at least 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_count: Option<usize>,
    /// Train participants of a round concurrently.
    pub parallel: bool,
}

impl Default for FederationConfig {
    fn default() -> Self {
        FederationConfig {
            participants: 30,
            local_epochs: 10,
            local_batch: 10,
            min_count: None,
            parallel: true,
        }
    }
}

impl FederationConfig {
    pub fn min_count_for(&self, train_size: usize) -> usize {
        self.min_count
            .unwrap_or_else(|| (50 * train_size / 13800).max(1))
    }
}

impl ExperimentConfig {
    pub fn new(regime: RegimeKind) -> Self {
        ExperimentConfig {
            regime,
            seeds: default_seeds(),
            output_dir: None,
            reference_report: None,
            data: DataConfig::default(),
            split: SplitSpec::default(),
            model: ModelSettings::default(),
            training: TrainingConfig::default(),
            federation: FederationConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that can be checked without loading data.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        let t = &self.training;
        if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning_rate must be positive, got {}", t.learning_rate)));
        }
        if !(t.temperature > 0.0 && t.temperature.is_finite()) {
            return Err(Error::config(format!("temperature must be positive, got {}", t.temperature)));
        }
        if t.global_epochs == 0 || t.batch_size == 0 {
            return Err(Error::config("global_epochs and batch_size must be positive"));
        }
        let f = &self.federation;
        if f.participants == 0 || f.local_epochs == 0 || f.local_batch == 0 {
            return Err(Error::config("participants, local_epochs and local_batch must be positive"));
        }
        self.split.validate()?;
        match &self.data {
            DataConfig::Synthetic(s) => s.validate()?,
            DataConfig::Csv(c) => {
                c.sources()?;
            }
        }
        // Dimension-independent part of the model check.
        crate::models::ModelConfig {
            scale: self.model.scale,
            leaky_slope: self.model.leaky_slope,
            ..crate::models::ModelConfig::default()
        }
        .validate()
    }
}
