//! Okapi BM25 over tokenized specifications.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::components::TokenSeq;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.5, b: 0.75 }
    }
}

/// Corpus statistics plus per-document term frequencies.
#[derive(Debug, Clone)]
pub struct Bm25Stats {
    pub params: Bm25Params,
    pub doc_freq: HashMap<String, usize>,
    pub doc_len: Vec<usize>,
    pub avg_doc_len: f64,
    pub n_docs: usize,
    term_freq: Vec<HashMap<String, usize>>,
}

impl Bm25Stats {
    pub fn build(docs: &[TokenSeq], params: Bm25Params) -> Self {
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        let mut term_freq = Vec::with_capacity(docs.len());
        for doc in docs {
            let mut tf: HashMap<String, usize> = HashMap::new();
            for t in doc.tokens() {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for t in tf.keys() {
                *doc_freq.entry(t.clone()).or_default() += 1;
            }
            term_freq.push(tf);
        }
        let doc_len: Vec<usize> = docs.iter().map(TokenSeq::len).collect();
        let avg_doc_len = if docs.is_empty() {
            0.0
        } else {
            doc_len.iter().sum::<usize>() as f64 / docs.len() as f64
        };
        Bm25Stats {
            params,
            doc_freq,
            doc_len,
            avg_doc_len,
            n_docs: docs.len(),
            term_freq,
        }
    }

    /// `ln((N − df + 0.5) / (df + 0.5) + 1)`.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        let n = self.n_docs as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    pub fn term_freq(&self, doc: usize, term: &str) -> usize {
        self.term_freq
            .get(doc)
            .and_then(|tf| tf.get(term).copied())
            .unwrap_or(0)
    }
}

/// BM25 relevance of document `doc` to the query tokens. Repeated query
/// tokens contribute once per occurrence.
pub fn bm25_score(query: &TokenSeq, doc: usize, stats: &Bm25Stats) -> Result<f64> {
    if doc >= stats.n_docs {
        return Err(Error::UnknownExemplar(format!("bm25 document {doc}")));
    }
    let Bm25Params { k1, b } = stats.params;
    let len_norm = if stats.avg_doc_len > 0.0 {
        stats.doc_len[doc] as f64 / stats.avg_doc_len
    } else {
        0.0
    };
    let mut score = 0.0;
    for term in query.tokens() {
        let tf = stats.term_freq(doc, term) as f64;
        if tf == 0.0 {
            continue;
        }
        score += stats.idf(term) * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * len_norm));
    }
    Ok(score)
}
