//! Exemplar database: ingestion, deduplication, complexity scoring, tiering
//! and train/test splitting.
//!
//! On disk a corpus directory holds `corpus.jsonl` (one record per line),
//! optional `tiers.json` (id → tier), optional `splits.json` and geometry
//! sidecar files referenced by `geometry_ref` relative to the directory.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::components::tokenize;
use crate::error::{Error, Result};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const TIERS_FILE: &str = "tiers.json";
pub const SPLITS_FILE: &str = "splits.json";

/// One (specification, code, optional geometry) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub id: String,
    pub spec: String,
    pub code: String,
    #[serde(default)]
    pub geometry_ref: Option<String>,
    /// Edge + face count of the ground-truth solid, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geom: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complexity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    Easy,
    Middle,
    Hard,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Easy, Tier::Middle, Tier::Hard];
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tier::Easy => "Easy",
            Tier::Middle => "Middle",
            Tier::Hard => "Hard",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Tier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(Tier::Easy),
            "middle" => Ok(Tier::Middle),
            "hard" => Ok(Tier::Hard),
            other => Err(Error::Config(format!("unknown tier {other:?}"))),
        }
    }
}

/// Ordered exemplar database. Index `i` is the exemplar's position.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    exemplars: Vec<Exemplar>,
    index: HashMap<String, usize>,
    pub tiers: Option<BTreeMap<String, Tier>>,
}

/// Supported corpus file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    #[default]
    JsonLines,
}

/// Result of [`ingest_corpus`].
#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: Corpus,
    /// Records removed because an earlier record had the same spec text.
    pub dropped: usize,
}

impl Corpus {
    /// Build from exemplars, keeping the first of any records with an
    /// identical spec. Duplicate ids and empty specs are rejected.
    pub fn from_exemplars(exemplars: Vec<Exemplar>) -> Result<Ingested> {
        let mut seen_specs = HashSet::new();
        let mut kept = Vec::with_capacity(exemplars.len());
        let mut dropped = 0;
        for ex in exemplars {
            if ex.spec.trim().is_empty() {
                return Err(Error::Contract(format!("exemplar {} has an empty spec", ex.id)));
            }
            if seen_specs.insert(ex.spec.clone()) {
                kept.push(ex);
            } else {
                dropped += 1;
            }
        }
        let mut index = HashMap::with_capacity(kept.len());
        for (i, ex) in kept.iter().enumerate() {
            if index.insert(ex.id.clone(), i).is_some() {
                return Err(Error::Contract(format!("duplicate exemplar id {}", ex.id)));
            }
        }
        Ok(Ingested {
            corpus: Corpus {
                exemplars: kept,
                index,
                tiers: None,
            },
            dropped,
        })
    }

    pub fn exemplars(&self) -> &[Exemplar] {
        &self.exemplars
    }

    pub fn len(&self) -> usize {
        self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Exemplar> {
        self.exemplars.get(i)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn by_id(&self, id: &str) -> Result<&Exemplar> {
        self.index_of(id)
            .map(|i| &self.exemplars[i])
            .ok_or_else(|| Error::UnknownExemplar(id.to_string()))
    }

    /// A new corpus holding only `ids`, in the order given.
    pub fn subset(&self, ids: &[String]) -> Result<Corpus> {
        let exemplars = ids
            .iter()
            .map(|id| self.by_id(id).cloned())
            .collect::<Result<Vec<_>>>()?;
        let mut sub = Corpus::from_exemplars(exemplars)?.corpus;
        sub.tiers = self
            .tiers
            .as_ref()
            .map(|t| ids.iter().filter_map(|id| t.get(id).map(|&x| (id.clone(), x))).collect());
        Ok(sub)
    }

    pub fn set_complexity(&mut self, scores: &[f64]) {
        for (ex, &s) in self.exemplars.iter_mut().zip(scores) {
            ex.complexity = Some(s);
        }
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for ex in &self.exemplars {
            serde_json::to_writer(&mut out, ex)?;
            out.push(b'\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&out).map_err(|e| Error::io(path, e))
    }

    /// Load `corpus.jsonl` and, when present, `tiers.json` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Corpus> {
        let mut corpus = ingest_corpus(&dir.join(CORPUS_FILE), CorpusFormat::JsonLines)?.corpus;
        let tiers_path = dir.join(TIERS_FILE);
        if tiers_path.exists() {
            corpus.tiers = Some(read_json(&tiers_path)?);
        }
        Ok(corpus)
    }

    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.write_jsonl(&dir.join(CORPUS_FILE))?;
        if let Some(tiers) = &self.tiers {
            write_json(&dir.join(TIERS_FILE), tiers)?;
        }
        Ok(())
    }

    /// Resolve an exemplar's geometry sidecar path relative to `dir`.
    pub fn geometry_path(&self, dir: &Path, id: &str) -> Result<Option<PathBuf>> {
        Ok(self.by_id(id)?.geometry_ref.as_ref().map(|r| dir.join(r)))
    }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Read a corpus file. Records keep file order; later records whose spec
/// repeats an earlier one are dropped and counted. Blank lines are skipped.
pub fn ingest_corpus(path: &Path, format: CorpusFormat) -> Result<Ingested> {
    match format {
        CorpusFormat::JsonLines => {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            read_jsonl(BufReader::new(file))
        }
    }
}

pub fn read_jsonl(reader: impl BufRead) -> Result<Ingested> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: Exemplar = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if ex.spec.trim().is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("record {} has an empty spec", ex.id),
            });
        }
        if !ids.insert(ex.id.clone()) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate id {}", ex.id),
            });
        }
        records.push(ex);
    }
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Corpus::from_exemplars(records)
}

/// Raw complexity metrics of one exemplar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityInputs {
    /// Token count of the specification.
    pub spec_len: u64,
    /// Edge + face count of the ground-truth model.
    pub geom: Option<u64>,
    /// Number of CAD operations invoked by the code.
    pub ops: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricRange {
    pub min: u64,
    pub max: u64,
}

impl MetricRange {
    fn of(values: impl Iterator<Item = u64>) -> Option<Self> {
        values.fold(None, |acc, v| match acc {
            None => Some(MetricRange { min: v, max: v }),
            Some(r) => Some(MetricRange {
                min: r.min.min(v),
                max: r.max.max(v),
            }),
        })
    }

    /// Min-max normalization; a degenerate range maps to 0.
    fn normalize(&self, x: u64) -> Result<f64> {
        if x < self.min || x > self.max {
            return Err(Error::Contract(format!(
                "value {x} outside corpus range [{}, {}]",
                self.min, self.max
            )));
        }
        if self.max == self.min {
            return Ok(0.0);
        }
        Ok((x - self.min) as f64 / (self.max - self.min) as f64)
    }
}

/// Per-metric min/max over a whole corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusStats {
    pub spec_len: MetricRange,
    /// `None` when no exemplar carries a geometry count.
    pub geom: Option<MetricRange>,
    pub ops: MetricRange,
}

impl CorpusStats {
    pub fn from_inputs(inputs: &[ComplexityInputs]) -> Result<Self> {
        Ok(CorpusStats {
            spec_len: MetricRange::of(inputs.iter().map(|i| i.spec_len)).ok_or(Error::EmptyCorpus)?,
            geom: MetricRange::of(inputs.iter().filter_map(|i| i.geom)),
            ops: MetricRange::of(inputs.iter().map(|i| i.ops)).ok_or(Error::EmptyCorpus)?,
        })
    }
}

/// `N(Len) + N(Geom) + N(Ops)` with independent min-max normalization.
/// A missing geometry count contributes 0.
pub fn complexity_score(inputs: &ComplexityInputs, stats: &CorpusStats) -> Result<f64> {
    let geom = match (inputs.geom, stats.geom) {
        (Some(g), Some(range)) => range.normalize(g)?,
        (Some(_), None) => {
            return Err(Error::Contract("geometry count given but corpus has no geometry range".into()))
        }
        (None, _) => 0.0,
    };
    Ok(stats.spec_len.normalize(inputs.spec_len)? + geom + stats.ops.normalize(inputs.ops)?)
}

/// Counts calls to a configurable list of CAD operation names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpsCounter {
    names: HashSet<String>,
}

pub const DEFAULT_OPS: [&str; 8] = [
    "box", "circle", "extrude", "cut", "union", "workplane", "polyline", "revolve",
];

impl Default for OpsCounter {
    fn default() -> Self {
        OpsCounter::new(DEFAULT_OPS)
    }
}

impl OpsCounter {
    pub fn new<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Self {
        OpsCounter {
            names: names.into_iter().map(|s| s.as_ref().to_ascii_lowercase()).collect(),
        }
    }

    /// Number of `name(` call sites (case-insensitive) for listed names.
    pub fn count(&self, code: &str) -> u64 {
        let bytes = code.as_bytes();
        let mut count = 0;
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            if c.is_ascii_alphabetic() || c == b'_' {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let ident = code[start..i].to_ascii_lowercase();
                let mut j = i;
                while j < bytes.len() && (bytes[j] == b' ' || bytes[j] == b'\t') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'(' && self.names.contains(&ident) {
                    count += 1;
                }
            } else {
                i += 1;
            }
        }
        count
    }
}

pub fn complexity_inputs(ex: &Exemplar, ops: &OpsCounter) -> ComplexityInputs {
    ComplexityInputs {
        spec_len: tokenize(&ex.spec).len() as u64,
        geom: ex.geom,
        ops: ops.count(&ex.code),
    }
}

/// Score every exemplar in place. Returns the ids scored without a
/// geometry count.
pub fn score_corpus(corpus: &mut Corpus, ops: &OpsCounter) -> Result<Vec<String>> {
    let inputs: Vec<_> = corpus.exemplars.iter().map(|e| complexity_inputs(e, ops)).collect();
    let stats = CorpusStats::from_inputs(&inputs)?;
    let scores = inputs
        .iter()
        .map(|i| complexity_score(i, &stats))
        .collect::<Result<Vec<_>>>()?;
    corpus.set_complexity(&scores);
    Ok(corpus
        .exemplars
        .iter()
        .filter(|e| e.geom.is_none())
        .map(|e| e.id.clone())
        .collect())
}

/// Sort by (complexity, id) and cut into three contiguous tiers whose sizes
/// differ by at most one; the remainder goes to Easy first, then Middle.
pub fn partition_tiers(corpus: &mut Corpus) -> Result<BTreeMap<String, Tier>> {
    let n = corpus.len();
    if n < 3 {
        return Err(Error::Partition(format!("need at least 3 exemplars, have {n}")));
    }
    let mut order: Vec<(f64, &str)> = Vec::with_capacity(n);
    for ex in &corpus.exemplars {
        let c = ex
            .complexity
            .ok_or_else(|| Error::Partition(format!("exemplar {} has no complexity score", ex.id)))?;
        if !c.is_finite() || c < 0.0 {
            return Err(Error::Partition(format!("exemplar {} has invalid complexity {c}", ex.id)));
        }
        order.push((c, &ex.id));
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    let sizes = tier_sizes(n);
    let mut tiers = BTreeMap::new();
    let mut it = order.into_iter();
    for (tier, size) in Tier::ALL.into_iter().zip(sizes) {
        for (_, id) in it.by_ref().take(size) {
            tiers.insert(id.to_string(), tier);
        }
    }
    corpus.tiers = Some(tiers.clone());
    Ok(tiers)
}

pub fn tier_sizes(n: usize) -> [usize; 3] {
    let base = n / 3;
    let rem = n % 3;
    [base + usize::from(rem > 0), base + usize::from(rem > 1), base]
}

/// Test / database partition of a tiered corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub test: BTreeMap<Tier, Vec<String>>,
    pub database: Vec<String>,
}

impl Split {
    pub fn test_ids(&self, tiers: &[Tier]) -> Vec<(Tier, String)> {
        tiers
            .iter()
            .flat_map(|t| {
                self.test
                    .get(t)
                    .into_iter()
                    .flatten()
                    .map(move |id| (*t, id.clone()))
            })
            .collect()
    }

    pub fn load(dir: &Path) -> Result<Split> {
        read_json(&dir.join(SPLITS_FILE))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(SPLITS_FILE), self)
    }
}

/// Draw `n_test` ids uniformly from each tier with a seeded generator; the
/// remainder, in corpus order, is the exemplar database.
pub fn split_test_set(corpus: &Corpus, n_test: usize, seed: u64) -> Result<Split> {
    let tiers = corpus
        .tiers
        .as_ref()
        .ok_or_else(|| Error::Split("corpus has not been partitioned into tiers".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = BTreeMap::new();
    let mut in_test = HashSet::new();
    for tier in Tier::ALL {
        let members: Vec<usize> = corpus
            .exemplars
            .iter()
            .enumerate()
            .filter(|(_, e)| tiers.get(&e.id) == Some(&tier))
            .map(|(i, _)| i)
            .collect();
        if n_test > members.len() {
            return Err(Error::Split(format!(
                "requested {n_test} test samples from tier {tier} of size {}",
                members.len()
            )));
        }
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, members.len(), n_test)
            .into_iter()
            .map(|j| members[j])
            .collect();
        picked.sort_unstable();
        in_test.extend(picked.iter().copied());
        test.insert(tier, picked.into_iter().map(|i| corpus.exemplars[i].id.clone()).collect());
    }
    let database = corpus
        .exemplars
        .iter()
        .enumerate()
        .filter(|(i, _)| !in_test.contains(i))
        .map(|(_, e)| e.id.clone())
        .collect();
    Ok(Split { seed, test, database })
}
