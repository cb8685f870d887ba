//! Experiment configuration, read from TOML.
//!
//! Every field has a default; the defaults describe the full study grid
//! (six bias values, five seeds, a 2000/500/500 split of 3000 items).
//!
//! ```toml
//! task = "OL"
//! betas = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3]
//! seeds = [10, 42, 512, 1010, 3344]
//! recipes = ["representative", "nonrep1", "nonrep2", "adjusted"]
//!
//! [split]
//! train = 2000
//! dev = 500
//! test = 500
//!
//! [gold]
//! source = "synthetic"
//! n = 3000
//! shape = { kind = "uniform", lo = 0.0, hi = 1.0 }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pair_core::pair::PopulationBenchmark;
use pair_core::simulation::{GoldShape, Recipe, Stratum, Task};
use pair_core::split::SplitCounts;
use pair_core::trainer::Hyper;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const PAPER_SEEDS: [u64; 5] = [10, 42, 512, 1010, 3344];
pub const PAPER_BETAS: [f64; 6] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum GoldSource {
    Synthetic {
        n: usize,
        shape: GoldShape,
        vocab_size: usize,
        tokens_per_item: usize,
        seed: u64,
    },
    File {
        path: PathBuf,
        #[serde(default = "default_subsample")]
        subsample: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_subsample() -> usize {
    12
}

impl Default for GoldSource {
    fn default() -> Self {
        GoldSource::Synthetic {
            n: 3000,
            shape: GoldShape::Uniform { lo: 0.0, hi: 1.0 },
            vocab_size: 200,
            tokens_per_item: 100,
            seed: 7,
        }
    }
}

/// Which binary reference the F1 score is computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Reference {
    /// Majority of the recipe's own test-split annotations.
    #[default]
    DatasetMajority,
    /// Majority of the unbiased gold proportion.
    GoldMajority,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultBand {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub betas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Seed for suite sampling and the item split; shared by all model seeds.
    pub data_seed: u64,
    pub recipes: Vec<Recipe>,
    pub split: SplitCounts,
    pub gold: GoldSource,
    pub benchmark: BTreeMap<Stratum, f64>,
    pub hyper: Hyper,
    pub f1_threshold: f64,
    pub f1_reference: F1Reference,
    /// Restrict to items with gold proportion in the band, rescaling the split.
    pub difficult: Option<DifficultBand>,
    pub output_dir: PathBuf,
    /// Worker threads for the sweep; 0 uses all cores.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::OL,
            betas: PAPER_BETAS.to_vec(),
            seeds: PAPER_SEEDS.to_vec(),
            data_seed: 2024,
            recipes: Recipe::STUDY.to_vec(),
            split: SplitCounts {
                train: 2000,
                dev: 500,
                test: 500,
            },
            gold: GoldSource::default(),
            benchmark: [(Stratum::from("A"), 0.5), (Stratum::from("B"), 0.5)].into(),
            hyper: Hyper::default(),
            f1_threshold: 0.5,
            f1_reference: F1Reference::default(),
            difficult: None,
            output_dir: PathBuf::from("results"),
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn benchmark(&self) -> Result<PopulationBenchmark> {
        Ok(PopulationBenchmark::new(self.benchmark.clone())?)
    }

    /// Checks everything that does not need the gold table loaded.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.betas.is_empty() {
            return Err(Error::Config("betas must not be empty".into()));
        }
        if let Some(b) = self.betas.iter().find(|b| !(0.0..=0.5).contains(*b)) {
            return Err(Error::Config(format!("beta {b} outside [0, 0.5]")));
        }
        if self.recipes.is_empty() || self.recipes.contains(&Recipe::Custom) {
            return Err(Error::Config(
                "recipes must be a non-empty subset of the four study recipes".into(),
            ));
        }
        if !(self.f1_threshold > 0.0 && self.f1_threshold < 1.0) {
            return Err(Error::Config(format!(
                "f1_threshold {} outside (0, 1)",
                self.f1_threshold
            )));
        }
        if let Some(band) = self.difficult {
            if !(0.0 <= band.lo && band.lo <= band.hi && band.hi <= 1.0) {
                return Err(Error::Config(format!(
                    "difficult band [{}, {}] is not inside [0, 1]",
                    band.lo, band.hi
                )));
            }
        }
        if let GoldSource::Synthetic { n, .. } = self.gold {
            if self.difficult.is_none() && n != self.split.total() {
                return Err(Error::Config(format!(
                    "split counts sum to {} but the synthetic gold table has {n} items",
                    self.split.total()
                )));
            }
        }
        self.hyper.validate()?;
        self.benchmark()?;
        Ok(())
    }
}
