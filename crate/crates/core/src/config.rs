//! Run configuration: one TOML file with nested sections, every field
//! optional with a documented default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codec;
use crate::dataset::{ExplanationStyle, Grouping, Sampling, DEFAULT_FOLDS};
use crate::error::{Error, Result};
use crate::neural::{AdamConfig, ModelConfig};
use crate::sim::{world, EntityId, WorldConfig, OBJECTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Episodes simulated for each failing scenario.
    pub episodes_per_scenario: usize,
    /// Additional episodes without an injected fault.
    pub success_episodes: usize,
    /// Objects cycled through across episodes.
    pub objects: Vec<String>,
    /// Goal places cycled through across episodes.
    pub goal_places: Vec<String>,
    pub layout: String,
    pub style: ExplanationStyle,
    pub sampling: Sampling,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            episodes_per_scenario: 9,
            success_episodes: 0,
            objects: OBJECTS.iter().map(|s| s.to_string()).collect(),
            goal_places: vec!["dining table".into()],
            layout: world::DEFAULT_LAYOUT.into(),
            style: ExplanationStyle::ContextBased,
            sampling: Sampling::Milestones,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub optimizer: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 20,
            patience: 20,
            max_epochs: 3000,
            optimizer: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldConfig {
    pub count: usize,
    pub grouping: Grouping,
}

impl Default for FoldConfig {
    fn default() -> Self {
        FoldConfig {
            count: DEFAULT_FOLDS,
            grouping: Grouping::Episode,
        }
    }
}

/// Output locations, relative to the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub episodes: PathBuf,
    pub dataset: PathBuf,
    pub checkpoints: PathBuf,
    pub report: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            episodes: "episodes".into(),
            dataset: "dataset.jsonl".into(),
            checkpoints: "checkpoints".into(),
            report: "report.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub world: WorldConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub folds: FoldConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            dataset: DatasetConfig::default(),
            world: WorldConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            folds: FoldConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        if d.episodes_per_scenario == 0 {
            return Err(Error::Config("dataset.episodes_per_scenario must be positive".into()));
        }
        if d.objects.is_empty() || d.goal_places.is_empty() {
            return Err(Error::Config("dataset.objects and dataset.goal_places must be nonempty".into()));
        }
        for o in &d.objects {
            if !EntityId::new(o)?.is_object() {
                return Err(Error::Config(format!("`{o}` is not an object of interest")));
            }
        }
        for p in &d.goal_places {
            if !EntityId::new(p)?.is_place() {
                return Err(Error::Config(format!("`{p}` is not a place")));
            }
        }
        if d.style == ExplanationStyle::None {
            return Err(Error::Config("dataset.style must be context_based or action_based".into()));
        }
        world::preset(&d.layout)?;
        self.world.validate()?;
        self.model.validate()?;
        self.train.optimizer.validate()?;
        if self.train.batch_size == 0 || self.train.max_epochs == 0 {
            return Err(Error::Config("train.batch_size and train.max_epochs must be positive".into()));
        }
        if self.folds.count < 3 {
            return Err(Error::Config("folds.count must be at least 3".into()));
        }
        Ok(())
    }

    /// Digest of the settings that shape generated data and models. Paths
    /// are excluded so moving a run does not change it.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.paths = PathsConfig::default();
        codec::digest(&c)
    }
}
