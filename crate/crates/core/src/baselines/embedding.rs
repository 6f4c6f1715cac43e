//! Text embedding providers for the clustering baseline.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::components::tokenize;
use crate::error::{Error, Result};

pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>>;
    fn dimension(&self) -> usize;
}

/// L2-normalized TF-IDF vectors over a fitted vocabulary.
///
/// `idf(t) = ln((1 + N) / (1 + df)) + 1`; terms outside the vocabulary are
/// ignored.
#[derive(Debug, Clone)]
pub struct TfIdf {
    vocab: BTreeMap<String, usize>,
    idf: Vec<f64>,
}

impl TfIdf {
    pub fn fit<'a>(docs: impl IntoIterator<Item = &'a str>) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut n = 0usize;
        for doc in docs {
            n += 1;
            let mut terms: Vec<String> = tokenize(doc).tokens().to_vec();
            terms.sort_unstable();
            terms.dedup();
            for t in terms {
                *df.entry(t).or_default() += 1;
            }
        }
        let mut vocab = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (i, (term, count)) in df.into_iter().enumerate() {
            vocab.insert(term, i);
            idf.push(((1.0 + n as f64) / (1.0 + count as f64)).ln() + 1.0);
        }
        TfIdf { vocab, idf }
    }

    pub fn vector(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.idf.len()];
        for t in tokenize(text).tokens() {
            if let Some(&i) = self.vocab.get(t) {
                v[i] += self.idf[i];
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl EmbeddingProvider for TfIdf {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }

    fn dimension(&self) -> usize {
        self.idf.len()
    }
}

/// Connection settings for an OpenAI-compatible `/embeddings` endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingServiceConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

fn default_key_env() -> String {
    "EMBEDDINGS_API_KEY".into()
}

fn default_timeout() -> f64 {
    60.0
}

/// Remote embeddings with an in-process memo so repeated texts map to the
/// same vector.
pub struct ServiceEmbeddings {
    config: EmbeddingServiceConfig,
    client: reqwest::blocking::Client,
    memo: Mutex<HashMap<String, Vec<f64>>>,
    dimension: Mutex<usize>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

impl ServiceEmbeddings {
    pub fn new(config: EmbeddingServiceConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| Error::Gateway(e.to_string()))?;
        Ok(ServiceEmbeddings {
            config,
            client,
            memo: Mutex::new(HashMap::new()),
            dimension: Mutex::new(0),
        })
    }

    fn fetch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let url = format!("{}/embeddings", self.config.base_url.trim_end_matches('/'));
        let mut req = self
            .client
            .post(url)
            .json(&serde_json::json!({ "model": self.config.model, "input": texts }));
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Error::Gateway(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(Error::Gateway(format!("embeddings endpoint returned {status}")));
        }
        let body: EmbeddingResponse = resp.json().map_err(|e| Error::Gateway(e.to_string()))?;
        let mut out = vec![Vec::new(); texts.len()];
        for d in body.data {
            if d.index >= out.len() {
                return Err(Error::Gateway(format!("embedding index {} out of range", d.index)));
            }
            out[d.index] = d.embedding;
        }
        if out.iter().any(Vec::is_empty) {
            return Err(Error::Gateway("embeddings response is missing entries".into()));
        }
        Ok(out)
    }
}

impl EmbeddingProvider for ServiceEmbeddings {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let missing: Vec<&str> = {
            let memo = self.memo.lock().expect("memo lock");
            let mut m: Vec<&str> = texts.iter().copied().filter(|t| !memo.contains_key(*t)).collect();
            m.sort_unstable();
            m.dedup();
            m
        };
        if !missing.is_empty() {
            let fetched = self.fetch(&missing)?;
            let mut memo = self.memo.lock().expect("memo lock");
            for (t, v) in missing.into_iter().zip(fetched) {
                *self.dimension.lock().expect("dimension lock") = v.len();
                memo.insert(t.to_string(), v);
            }
        }
        let memo = self.memo.lock().expect("memo lock");
        Ok(texts.iter().map(|t| memo[*t].clone()).collect())
    }

    fn dimension(&self) -> usize {
        *self.dimension.lock().expect("dimension lock")
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
