use std::path::{Path, PathBuf};

use anyhow::Context;
use imcprompt::data::{SplitFractions, Stratify};
use imcprompt::evaluation::DEFAULT_SEEDS;
use imcprompt::prompting::PromptConfig;
use imcprompt::ranking::MetricConfig;
use imcprompt::refclass::ClassifierConfig;
use imcprompt::synth::SynthConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub fractions: SplitFractions,
    pub stratify: Stratify,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            fractions: SplitFractions::default(),
            stratify: Stratify::CellType,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub dataset: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Everything a run can be configured with. Flags override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub metric: MetricConfig,
    pub prompt: PromptConfig,
    pub classifier: ClassifierConfig,
    pub synth: SynthConfig,
    pub split: SplitConfig,
    pub seeds: Vec<u64>,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            metric: MetricConfig::default(),
            prompt: PromptConfig::default(),
            classifier: ClassifierConfig::default(),
            synth: SynthConfig::default(),
            split: SplitConfig::default(),
            seeds: DEFAULT_SEEDS.to_vec(),
            paths: PathsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| imcprompt::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        toml::from_str(&text).with_context(|| format!("config {}", path.display()))
    }
}
