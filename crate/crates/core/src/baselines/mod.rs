//! Comparison selectors and the strategy dispatcher shared by the CLI and
//! the experiment harness.

mod bm25;
mod diversity;
mod embedding;
mod levenshtein;
mod random;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bm25::{bm25_score, Bm25Params, Bm25Stats};
pub use diversity::{kmeans, select_diversity, KMeansConfig};
pub use embedding::{cosine, EmbeddingProvider, EmbeddingServiceConfig, ServiceEmbeddings, TfIdf};
pub use levenshtein::levenshtein;
pub use random::select_random;

use crate::components::{tokenize, ComponentSet, Granularities, TokenSeq};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::selection::{greedy_with, GreedyOptions, SelectionResult, TilingObjective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Dst,
    Random,
    Ldsim,
    Bm25,
    Diversity,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Dst,
        Strategy::Random,
        Strategy::Ldsim,
        Strategy::Bm25,
        Strategy::Diversity,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Dst => "dst",
            Strategy::Random => "random",
            Strategy::Ldsim => "ldsim",
            Strategy::Bm25 => "bm25",
            Strategy::Diversity => "diversity",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

/// Indices ordered by ascending edit distance to `query`, lowest index on ties.
pub fn rank_ldsim(specs: &[&str], query: &str) -> Vec<usize> {
    let dist: Vec<usize> = specs.par_iter().map(|s| levenshtein(s, query)).collect();
    let mut order: Vec<usize> = (0..specs.len()).collect();
    order.sort_by_key(|&i| (dist[i], i));
    order
}

/// Indices ordered by descending BM25 score, lowest index on ties.
pub fn rank_bm25(stats: &Bm25Stats, query: &TokenSeq) -> Result<Vec<usize>> {
    let scores = (0..stats.n_docs)
        .into_par_iter()
        .map(|i| bm25_score(query, i, stats))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..stats.n_docs).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(order)
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k > n {
        return Err(Error::Selection(format!("requested {k} exemplars from a database of {n}")));
    }
    Ok(())
}

pub fn select_ldsim(specs: &[&str], query: &str, k: usize) -> Result<Vec<usize>> {
    check_k(k, specs.len())?;
    Ok(rank_ldsim(specs, query).into_iter().take(k).collect())
}

pub fn select_bm25(stats: &Bm25Stats, query: &TokenSeq, k: usize) -> Result<Vec<usize>> {
    check_k(k, stats.n_docs)?;
    Ok(rank_bm25(stats, query)?.into_iter().take(k).collect())
}

/// Precomputed per-database state for every strategy.
pub struct Selector<'a> {
    db: &'a Corpus,
    granularities: Granularities,
    components: Vec<ComponentSet>,
    bm25: Bm25Stats,
    provider: Box<dyn EmbeddingProvider + 'a>,
    db_embeddings: Vec<Vec<f64>>,
    pub kmeans: KMeansConfig,
    pub fill_to_k: bool,
}

impl<'a> Selector<'a> {
    /// Build with the default TF-IDF embeddings fitted on the database.
    pub fn new(db: &'a Corpus, granularities: Granularities) -> Result<Self> {
        let tfidf = TfIdf::fit(db.exemplars().iter().map(|e| e.spec.as_str()));
        Self::with_provider(db, granularities, Box::new(tfidf))
    }

    pub fn with_provider(
        db: &'a Corpus,
        granularities: Granularities,
        provider: Box<dyn EmbeddingProvider + 'a>,
    ) -> Result<Self> {
        let components = db
            .exemplars()
            .par_iter()
            .map(|e| ComponentSet::from_spec(&e.spec, &granularities))
            .collect();
        Self::with_components(db, granularities, components, provider)
    }

    /// Use precomputed component sets (aligned with `db`).
    pub fn with_components(
        db: &'a Corpus,
        granularities: Granularities,
        components: Vec<ComponentSet>,
        provider: Box<dyn EmbeddingProvider + 'a>,
    ) -> Result<Self> {
        if components.len() != db.len() {
            return Err(Error::Contract("component sets not aligned with database".into()));
        }
        let tokens: Vec<TokenSeq> = db.exemplars().iter().map(|e| tokenize(&e.spec)).collect();
        let bm25 = Bm25Stats::build(&tokens, Bm25Params::default());
        let specs: Vec<&str> = db.exemplars().iter().map(|e| e.spec.as_str()).collect();
        let db_embeddings = provider.embed(&specs)?;
        Ok(Selector {
            db,
            granularities,
            components,
            bm25,
            provider,
            db_embeddings,
            kmeans: KMeansConfig::default(),
            fill_to_k: false,
        })
    }

    pub fn database(&self) -> &Corpus {
        self.db
    }

    pub fn components(&self) -> &[ComponentSet] {
        &self.components
    }

    pub fn granularities(&self) -> &Granularities {
        &self.granularities
    }

    pub fn objective(&self, query_spec: &str) -> Result<TilingObjective> {
        let q = ComponentSet::from_spec(query_spec, &self.granularities);
        TilingObjective::new(&self.components, &q)
    }

    /// Select `k` exemplars for `query_spec`. `k = 0` yields an empty
    /// selection. Every strategy reports the tiling ratio it achieves.
    pub fn select(&self, strategy: Strategy, query_spec: &str, k: usize, seed: u64) -> Result<SelectionResult> {
        let objective = self.objective(query_spec)?;
        if k == 0 {
            return SelectionResult::from_order(&objective, Vec::new());
        }
        let specs = || self.db.exemplars().iter().map(|e| e.spec.as_str()).collect::<Vec<_>>();
        let order = match strategy {
            Strategy::Dst => {
                let fill_order = if self.fill_to_k {
                    Some(rank_bm25(&self.bm25, &tokenize(query_spec))?)
                } else {
                    None
                };
                return greedy_with(&objective, k, &GreedyOptions { lazy: true, fill_order });
            }
            Strategy::Random => select_random(self.db.len(), k, seed)?,
            Strategy::Ldsim => select_ldsim(&specs(), query_spec, k)?,
            Strategy::Bm25 => select_bm25(&self.bm25, &tokenize(query_spec), k)?,
            Strategy::Diversity => {
                check_k(k, self.db.len())?;
                let q = self.provider.embed(&[query_spec])?.remove(0);
                select_diversity(&self.db_embeddings, &q, k, seed, self.kmeans)?
            }
        };
        SelectionResult::from_order(&objective, order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Exemplar;

    fn corpus(specs: &[&str]) -> Corpus {
        let ex = specs
            .iter()
            .enumerate()
            .map(|(i, s)| Exemplar {
                id: format!("d{i}"),
                spec: s.to_string(),
                code: format!("code {i}"),
                geometry_ref: None,
                geom: None,
                complexity: None,
            })
            .collect();
        Corpus::from_exemplars(ex).unwrap().corpus
    }

    #[test]
    fn strategy_parse() {
        assert_eq!("BM25".parse::<Strategy>().unwrap(), Strategy::Bm25);
        assert!("nope".parse::<Strategy>().is_err());
    }

    #[test]
    fn similarity_selectors_put_identical_spec_first() {
        let specs = ["square plate", "round plate with four holes", "hex nut"];
        let query = "round plate with four holes";
        assert_eq!(select_ldsim(&specs, query, 1).unwrap(), vec![1]);
        let toks: Vec<_> = specs.iter().map(|s| tokenize(s)).collect();
        let stats = Bm25Stats::build(&toks, Bm25Params::default());
        assert_eq!(select_bm25(&stats, &tokenize(query), 1).unwrap(), vec![1]);
        assert!(select_ldsim(&specs, query, 4).is_err());
        assert!(select_bm25(&stats, &tokenize(query), 4).is_err());
    }

    #[test]
    fn ldsim_full_sort() {
        let specs = ["abcd", "abc", "a", "abce"];
        assert_eq!(select_ldsim(&specs, "abc", 4).unwrap(), vec![1, 0, 3, 2]);
    }

    #[test]
    fn every_strategy_returns_k_distinct() {
        let db = corpus(&[
            "a rectangular plate with four holes",
            "a cylinder with a central bore",
            "a hex nut with chamfered edges",
            "a rectangular block with a slot",
            "an l shaped bracket with two holes",
            "a flange with six bolt holes",
        ]);
        let sel = Selector::new(&db, Granularities::new(vec![2, 4]).unwrap()).unwrap();
        let q = "a rectangular plate with two holes";
        for s in Strategy::ALL {
            let r = sel.select(s, q, 3, 42).unwrap();
            let mut c = r.chosen.clone();
            c.sort_unstable();
            c.dedup();
            if s == Strategy::Dst {
                assert!(c.len() <= 3 && !c.is_empty());
            } else {
                assert_eq!(c.len(), 3, "{s}");
            }
            assert_eq!(r, sel.select(s, q, 3, 42).unwrap(), "{s} not deterministic");
            assert!((0.0..=1.0).contains(&r.tiling_ratio));
        }
        let empty = sel.select(Strategy::Dst, q, 0, 0).unwrap();
        assert!(empty.chosen.is_empty());
        assert_eq!(empty.tiling_ratio, 0.0);
    }
}
