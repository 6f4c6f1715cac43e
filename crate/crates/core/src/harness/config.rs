use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::Strategy;
use crate::components::Granularities;
use crate::corpus::Tier;
use crate::error::{Error, Result};
use crate::gateway::GatewayConfig;
use crate::geometry::VoxelSpec;
use crate::runner::SamplingConfig;

/// Where run results come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Execution {
    /// Look results up by script hash; nothing is executed.
    Stored { results_dir: PathBuf },
    /// Spawn the runner command and talk JSON lines to it.
    Runner {
        command: Vec<String>,
        #[serde(default = "default_run_timeout")]
        timeout_secs: f64,
        #[serde(default)]
        sampling: SamplingConfig,
    },
}

fn default_run_timeout() -> f64 {
    30.0
}

fn all_tiers() -> Vec<Tier> {
    Tier::ALL.to_vec()
}

fn default_workers() -> usize {
    4
}

/// One experiment cell. Loaded from TOML; relative paths resolve against
/// the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub corpus_dir: PathBuf,
    pub strategy: Strategy,
    /// Shots; 0 is zero-shot.
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "all_tiers")]
    pub tiers: Vec<Tier>,
    #[serde(default)]
    pub granularities: Granularities,
    /// Top up a short DST selection from the BM25 ranking.
    #[serde(default)]
    pub fill_to_k: bool,
    /// Drop the example markers from zero-shot prompts.
    #[serde(default)]
    pub omit_empty_examples: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub gateway: GatewayConfig,
    #[serde(default)]
    pub metrics: VoxelSpec,
    pub execution: Execution,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Make relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus_dir);
        if let Some(c) = self.gateway.cassette.as_mut() {
            fix(c);
        }
        if let Execution::Stored { results_dir } = &mut self.execution {
            fix(results_dir);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tiers.is_empty() {
            return Err(Error::Config("no tiers selected".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if self.metrics.resolution == 0 || !(self.metrics.half_extent > 0.0) {
            return Err(Error::Config("metric grid must have positive resolution and extent".into()));
        }
        if !self.corpus_dir.is_dir() {
            return Err(Error::Config(format!("corpus directory {} not found", self.corpus_dir.display())));
        }
        self.gateway.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toml() {
        let c = ExperimentConfig::from_toml(
            r#"
            corpus_dir = "corpus"
            strategy = "dst"
            k = 3

            [gateway]
            cassette = "cassette.jsonl"

            [execution]
            mode = "stored"
            results_dir = "results"
            "#,
        )
        .unwrap();
        assert_eq!(c.strategy, Strategy::Dst);
        assert_eq!(c.tiers, Tier::ALL.to_vec());
        assert_eq!(c.granularities, Granularities::default());
        assert_eq!(c.gateway.temperature, 0.0);
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let mut c = ExperimentConfig::from_toml(
            "corpus_dir = \"db\"\nstrategy = \"bm25\"\nk = 1\n[execution]\nmode = \"stored\"\nresults_dir = \"/abs\"\n",
        )
        .unwrap();
        c.resolve_paths(Path::new("/cfg"));
        assert_eq!(c.corpus_dir, PathBuf::from("/cfg/db"));
        assert_eq!(c.execution, Execution::Stored { results_dir: "/abs".into() });
    }

    #[test]
    fn rejects_unknown_strategy() {
        let err = ExperimentConfig::from_toml("corpus_dir = \"x\"\nstrategy = \"magic\"\nk = 1\n[execution]\nmode = \"stored\"\nresults_dir = \"r\"\n");
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
