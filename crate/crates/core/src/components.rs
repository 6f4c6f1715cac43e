//! Multi-granular n-gram components of a design specification.
//!
//! A specification is tokenized into lowercase words, and for every window
//! size `n` in a [`Granularities`] list the set of distinct contiguous
//! `n`-token windows is collected. The weighted size of a component set is
//! `Σ_n n · |C⁽ⁿ⁾|`, so longer phrases count proportionally more.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bumped whenever [`tokenize`] changes behaviour; part of the cache key.
pub const TOKENIZER_VERSION: &str = "ws-punct-v1";

/// Default window sizes.
pub const DEFAULT_GRANULARITIES: [usize; 5] = [2, 4, 8, 16, 32];

/// Normalized word tokens of one specification.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSeq(iter.into_iter().map(Into::into).collect())
    }
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2013}' | '\u{2014}'
                | '\u{2026}' | '\u{00AB}' | '\u{00BB}' | '\u{00BF}' | '\u{00A1}'
        )
}

/// Lowercase, split on Unicode whitespace, strip leading and trailing
/// punctuation from each token and drop tokens that end up empty.
///
/// Inner punctuation survives, so `2.5` and `m6x1.0` stay intact.
pub fn tokenize(spec: &str) -> TokenSeq {
    spec.split_whitespace()
        .map(|raw| raw.trim_matches(is_punctuation).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Distinct contiguous `n`-token windows joined by single spaces.
pub fn extract_ngrams(tokens: &TokenSeq, n: usize) -> Result<BTreeSet<String>> {
    if n == 0 {
        return Err(Error::Contract("n-gram size must be at least 1".into()));
    }
    Ok(tokens.0.windows(n).map(|w| w.join(" ")).collect())
}

/// Ordered, strictly increasing list of window sizes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Granularities(Vec<usize>);

impl Granularities {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Contract("granularity list is empty".into()));
        }
        if sizes.iter().any(|&n| n == 0) {
            return Err(Error::Contract("granularity sizes must be >= 1".into()));
        }
        if sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract(
                "granularity sizes must be strictly increasing".into(),
            ));
        }
        Ok(Granularities(sizes))
    }

    pub fn sizes(&self) -> &[usize] {
        &self.0
    }
}

impl Default for Granularities {
    fn default() -> Self {
        Granularities(DEFAULT_GRANULARITIES.to_vec())
    }
}

impl TryFrom<Vec<usize>> for Granularities {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Granularities::new(v)
    }
}

impl From<Granularities> for Vec<usize> {
    fn from(g: Granularities) -> Self {
        g.0
    }
}

/// Per-granularity n-gram sets of one specification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentSet {
    granularities: Granularities,
    // aligned with `granularities.sizes()`
    per_n: Vec<BTreeSet<String>>,
}

impl ComponentSet {
    pub fn from_spec(spec: &str, granularities: &Granularities) -> Self {
        Self::from_tokens(&tokenize(spec), granularities)
    }

    pub fn from_tokens(tokens: &TokenSeq, granularities: &Granularities) -> Self {
        let per_n = granularities
            .sizes()
            .iter()
            .map(|&n| tokens.0.windows(n).map(|w| w.join(" ")).collect())
            .collect();
        ComponentSet {
            granularities: granularities.clone(),
            per_n,
        }
    }

    /// Rebuild from stored per-granularity lists; each n-gram must hold
    /// exactly `n` tokens.
    pub fn from_parts(granularities: Granularities, per_n: Vec<BTreeSet<String>>) -> Result<Self> {
        if per_n.len() != granularities.sizes().len() {
            return Err(Error::Contract(format!(
                "expected {} granularity sets, got {}",
                granularities.sizes().len(),
                per_n.len()
            )));
        }
        for (&n, set) in granularities.sizes().iter().zip(&per_n) {
            if let Some(bad) = set.iter().find(|g| g.split(' ').count() != n) {
                return Err(Error::Contract(format!("{bad:?} is not a {n}-gram")));
            }
        }
        Ok(ComponentSet {
            granularities,
            per_n,
        })
    }

    pub fn granularities(&self) -> &Granularities {
        &self.granularities
    }

    /// `(n, C⁽ⁿ⁾)` pairs in granularity order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &BTreeSet<String>)> {
        self.granularities.sizes().iter().copied().zip(&self.per_n)
    }

    pub fn get(&self, n: usize) -> Option<&BTreeSet<String>> {
        let pos = self.granularities.sizes().iter().position(|&m| m == n)?;
        Some(&self.per_n[pos])
    }

    /// The union view `C(X)` over every granularity.
    pub fn union(&self) -> BTreeSet<&str> {
        self.per_n
            .iter()
            .flat_map(|s| s.iter().map(String::as_str))
            .collect()
    }

    pub fn weighted_size(&self) -> u64 {
        self.iter().map(|(n, s)| (n * s.len()) as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.per_n.iter().all(BTreeSet::is_empty)
    }
}

/// `w((∪ᵢ Cᵢ) ∩ C_query)`, intersecting per granularity only.
pub fn weighted_intersection(sets: &[&ComponentSet], query: &ComponentSet) -> Result<u64> {
    for s in sets {
        if s.granularities != query.granularities {
            return Err(Error::Contract(
                "component sets built with different granularities".into(),
            ));
        }
    }
    let mut total = 0u64;
    for (pos, (n, query_set)) in query.iter().enumerate() {
        let covered = query_set
            .iter()
            .filter(|g| sets.iter().any(|s| s.per_n[pos].contains(*g)))
            .count();
        total += (n * covered) as u64;
    }
    Ok(total)
}

/// On-disk cache of precomputed component sets, keyed by tokenizer version
/// and granularities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentCache {
    pub tokenizer_version: String,
    pub granularities: Granularities,
    /// id → one n-gram list per granularity.
    pub entries: BTreeMap<String, Vec<Vec<String>>>,
}

impl ComponentCache {
    pub fn build<'a>(
        specs: impl IntoIterator<Item = (&'a str, &'a str)>,
        granularities: &Granularities,
    ) -> Self {
        let entries = specs
            .into_iter()
            .map(|(id, spec)| {
                let cs = ComponentSet::from_spec(spec, granularities);
                let lists = cs.per_n.into_iter().map(|s| s.into_iter().collect()).collect();
                (id.to_string(), lists)
            })
            .collect();
        ComponentCache {
            tokenizer_version: TOKENIZER_VERSION.to_string(),
            granularities: granularities.clone(),
            entries,
        }
    }

    pub fn matches(&self, granularities: &Granularities) -> bool {
        self.tokenizer_version == TOKENIZER_VERSION && &self.granularities == granularities
    }

    pub fn get(&self, id: &str) -> Result<ComponentSet> {
        let lists = self
            .entries
            .get(id)
            .ok_or_else(|| Error::UnknownExemplar(id.to_string()))?;
        ComponentSet::from_parts(
            self.granularities.clone(),
            lists.iter().map(|l| l.iter().cloned().collect()).collect(),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
