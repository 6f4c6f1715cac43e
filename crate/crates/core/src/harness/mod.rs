//! End-to-end experiments: select → prompt → complete → extract → run →
//! score, one [`EvalRecord`] per test query, plus tier aggregates.
//!
//! A stage that fails is recorded on the query and the batch carries on.
//! Invalid queries are scored as the penalty solid, so they pull the means
//! down instead of disappearing from them.

mod config;
mod report;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{ExperimentConfig, Execution};
pub use report::{
    correlation_report, failure_report, load_reports, pearson, sweep_csv, Aggregate, CorrelationCell,
    CorrelationReport, FailureCounts, FailureReport, FailureRow,
};

use crate::baselines::{Selector, Strategy};
use crate::components::{ComponentSet, Granularities};
use crate::corpus::{Corpus, Split, Tier};
use crate::error::{Error, Result};
use crate::gateway::Gateway;
use crate::geometry::{align_and_score, EvalMetrics, GeometryArtifact};
use crate::prompting::{build_prompt, extract_code, ExtractionStatus};
use crate::runner::{code_hash, FailureClass, ResultStore, RunRequest, SamplingConfig, ScriptRunner, SubprocessRunner};

/// Which step of the pipeline failed for a query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub tier: Tier,
    pub chosen_ids: Vec<String>,
    pub gains: Vec<u64>,
    pub tiling_ratio: f64,
    pub prompt_sha256: Option<String>,
    pub extraction: Option<ExtractionStatus>,
    pub code_sha256: Option<String>,
    pub valid: bool,
    pub failure_class: Option<FailureClass>,
    pub message: Option<String>,
    pub stage_error: Option<StageError>,
    /// Absent only when the ground truth itself could not be loaded.
    pub metrics: Option<EvalMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub strategy: Strategy,
    pub k: usize,
    pub seed: u64,
    pub granularities: Granularities,
    pub tiers: Vec<Tier>,
    pub records: Vec<EvalRecord>,
    /// One entry per configured tier, then `all`.
    pub aggregates: Vec<Aggregate>,
}

impl RunReport {
    /// Pretty JSON with a trailing newline; stable for identical inputs.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn overall(&self) -> &Aggregate {
        self.aggregates.last().expect("aggregates always end with the overall row")
    }
}

/// Per-query seed: the configured seed mixed with the query id, so random
/// strategies differ across queries yet repeat across runs.
pub fn query_seed(seed: u64, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Loaded corpus, split, ground truths and backends for one configuration.
/// Reusable across shot counts.
pub struct Experiment {
    config: ExperimentConfig,
    corpus: Corpus,
    db: Corpus,
    components: Vec<ComponentSet>,
    queries: Vec<(Tier, String)>,
    truths: BTreeMap<String, std::result::Result<GeometryArtifact, String>>,
    gateway: Gateway,
    runner: Box<dyn ScriptRunner>,
    run_timeout: f64,
    sampling: SamplingConfig,
}

impl Experiment {
    /// Load everything the config points at and build the backends it names.
    pub fn open(config: ExperimentConfig) -> Result<Self> {
        let gateway = Gateway::new(config.gateway.clone())?;
        let runner: Box<dyn ScriptRunner> = match &config.execution {
            Execution::Stored { results_dir } => Box::new(ResultStore::new(results_dir)),
            Execution::Runner { command, .. } => Box::new(SubprocessRunner::new(command, ".")?),
        };
        Self::with_backends(config, gateway, runner)
    }

    pub fn with_backends(config: ExperimentConfig, gateway: Gateway, runner: Box<dyn ScriptRunner>) -> Result<Self> {
        let corpus = Corpus::load_dir(&config.corpus_dir)?;
        let split = Split::load(&config.corpus_dir)?;
        let db = corpus.subset(&split.database)?;
        let components = db
            .exemplars()
            .par_iter()
            .map(|e| ComponentSet::from_spec(&e.spec, &config.granularities))
            .collect();
        let queries = split.test_ids(&config.tiers);
        let mut truths = BTreeMap::new();
        for (_, id) in &queries {
            let truth = match corpus.geometry_path(&config.corpus_dir, id)? {
                Some(path) => GeometryArtifact::load(&path).map_err(|e| e.to_string()),
                None => Err(format!("exemplar {id} has no geometry reference")),
            };
            truths.insert(id.clone(), truth);
        }
        let (run_timeout, sampling) = match &config.execution {
            Execution::Runner { timeout_secs, sampling, .. } => (*timeout_secs, *sampling),
            Execution::Stored { .. } => (30.0, SamplingConfig::default()),
        };
        log::info!(
            "experiment: {} queries, database of {} exemplars, strategy {}",
            queries.len(),
            db.len(),
            config.strategy
        );
        Ok(Experiment {
            config,
            corpus,
            db,
            components,
            queries,
            truths,
            gateway,
            runner,
            run_timeout,
            sampling,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn queries(&self) -> &[(Tier, String)] {
        &self.queries
    }

    pub fn database(&self) -> &Corpus {
        &self.db
    }

    /// Run the configured shot count.
    pub fn run(&self) -> Result<RunReport> {
        self.run_k(self.config.k)
    }

    /// Run with `k` shots, everything else as configured.
    pub fn run_k(&self, k: usize) -> Result<RunReport> {
        let mut selector = Selector::with_components(
            &self.db,
            self.config.granularities.clone(),
            self.components.clone(),
            Box::new(crate::baselines::TfIdf::fit(self.db.exemplars().iter().map(|e| e.spec.as_str()))),
        )?;
        selector.fill_to_k = self.config.fill_to_k;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        let records: Vec<EvalRecord> = pool.install(|| {
            self.queries
                .par_iter()
                .map(|(tier, id)| self.evaluate(&selector, k, *tier, id))
                .collect()
        });
        let mut aggregates: Vec<Aggregate> = self
            .config
            .tiers
            .iter()
            .map(|t| Aggregate::over(t.to_string(), records.iter().filter(|r| r.tier == *t)))
            .collect();
        aggregates.push(Aggregate::over("all".into(), records.iter()));
        Ok(RunReport {
            strategy: self.config.strategy,
            k,
            seed: self.config.seed,
            granularities: self.config.granularities.clone(),
            tiers: self.config.tiers.clone(),
            records,
            aggregates,
        })
    }

    fn evaluate(&self, selector: &Selector<'_>, k: usize, tier: Tier, id: &str) -> EvalRecord {
        let mut rec = EvalRecord {
            id: id.to_string(),
            tier,
            chosen_ids: Vec::new(),
            gains: Vec::new(),
            tiling_ratio: 0.0,
            prompt_sha256: None,
            extraction: None,
            code_sha256: None,
            valid: false,
            failure_class: None,
            message: None,
            stage_error: None,
            metrics: None,
        };
        let generated = self.generate(selector, k, &mut rec);
        let truth = match &self.truths[id] {
            Ok(t) => t,
            Err(msg) => {
                rec.valid = false;
                rec.stage_error.get_or_insert(StageError {
                    stage: "ground-truth".into(),
                    message: msg.clone(),
                });
                return rec;
            }
        };
        let scored = match &generated {
            Some(artifact) => align_and_score(artifact, truth, &self.config.metrics),
            None => align_and_score(&GeometryArtifact::invalid_penalty(), truth, &self.config.metrics),
        };
        match scored {
            Ok(m) => {
                rec.valid = generated.is_some();
                rec.metrics = Some(m);
            }
            Err(e) if generated.is_some() => {
                rec.valid = false;
                rec.stage_error = Some(StageError {
                    stage: "metrics".into(),
                    message: e.to_string(),
                });
                rec.metrics = align_and_score(&GeometryArtifact::invalid_penalty(), truth, &self.config.metrics).ok();
            }
            Err(e) => {
                rec.stage_error.get_or_insert(StageError {
                    stage: "metrics".into(),
                    message: e.to_string(),
                });
            }
        }
        rec
    }

    /// Everything up to the runner; returns the generated solid when the
    /// script ran cleanly.
    fn generate(&self, selector: &Selector<'_>, k: usize, rec: &mut EvalRecord) -> Option<GeometryArtifact> {
        let stage = |rec: &mut EvalRecord, stage: &str, e: Error| -> Option<GeometryArtifact> {
            rec.stage_error = Some(StageError {
                stage: stage.into(),
                message: e.to_string(),
            });
            None
        };
        let query = match self.corpus.by_id(&rec.id) {
            Ok(q) => q,
            Err(e) => return stage(rec, "corpus", e),
        };
        let seed = query_seed(self.config.seed, &rec.id);
        let selection = match selector.select(self.config.strategy, &query.spec, k, seed) {
            Ok(s) => s,
            Err(e) => return stage(rec, "selection", e),
        };
        rec.chosen_ids = selection
            .chosen
            .iter()
            .map(|&i| self.db.exemplars()[i].id.clone())
            .collect();
        rec.gains = selection.gains.clone();
        rec.tiling_ratio = selection.tiling_ratio;

        let mut prompt = match build_prompt(&selection, &self.db, &query.spec) {
            Ok(p) => p,
            Err(e) => return stage(rec, "prompt", e),
        };
        prompt.omit_empty_examples = self.config.omit_empty_examples;
        rec.prompt_sha256 = Some(self.gateway.hash(&prompt));
        let response = match self.gateway.complete(&prompt) {
            Ok(r) => r,
            Err(e) => return stage(rec, "gateway", e),
        };

        let extraction = extract_code(&response);
        rec.extraction = Some(extraction.status);
        let Some(code) = extraction.code else {
            rec.failure_class = Some(FailureClass::TypeI);
            rec.message = Some("no code block in response".into());
            return None;
        };
        rec.code_sha256 = Some(code_hash(&code));
        let request = RunRequest {
            id: rec.id.clone(),
            code,
            timeout: self.run_timeout,
            seed,
            sampling: self.sampling,
        };
        let result = match self.runner.run(&request) {
            Ok(r) => r,
            Err(e) => return stage(rec, "runner", e),
        };
        if result.is_ok() {
            result.artifact
        } else {
            rec.failure_class = result.failure_class;
            rec.message = Some(result.message);
            None
        }
    }
}

/// Open the configured experiment and run it once.
pub fn run_experiment(config: ExperimentConfig) -> Result<RunReport> {
    Experiment::open(config)?.run()
}

/// One report per shot count, sharing the loaded corpus, ground truths and
/// backends.
pub fn sweep_shots(config: ExperimentConfig, shots: &[usize]) -> Result<Vec<RunReport>> {
    let experiment = Experiment::open(config)?;
    shots.iter().map(|&k| experiment.run_k(k)).collect()
}
