//! Cluster-then-pick selection: k-means over embeddings, then the member of
//! each cluster most cosine-similar to the query.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::embedding::cosine;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig { max_iter: 100, tol: 1e-6 }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Seeded k-means with k-means++ initialization. Returns the cluster index
/// of every point. An empty cluster is re-seeded at the point farthest from
/// its current centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, config: KMeansConfig) -> Result<Vec<usize>> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::Selection(format!("cannot form {k} clusters from {n} points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            // guard against landing on an already-chosen point through rounding
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&d| d > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }

    let dim = points[0].len();
    let mut assign = vec![0usize; n];
    for _ in 0..config.max_iter {
        let mut dists = vec![0.0; n];
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            assign[i] = c;
            dists[i] = d;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut moved = 0.0f64;
        for c in 0..k {
            let next = if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("non-empty");
                dists[far] = 0.0;
                points[far].clone()
            } else {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            };
            moved = moved.max(sq_dist(&next, &centroids[c]).sqrt());
            centroids[c] = next;
        }
        if moved <= config.tol {
            break;
        }
    }
    for (i, p) in points.iter().enumerate() {
        assign[i] = nearest(p, &centroids).0;
    }
    Ok(assign)
}

/// Per cluster (in cluster order) the member most similar to the query.
/// If duplicate embeddings leave clusters empty, the remaining slots go to
/// the most query-similar unpicked points so exactly `k` indices return.
pub fn select_diversity(
    embeddings: &[Vec<f64>],
    query: &[f64],
    k: usize,
    seed: u64,
    config: KMeansConfig,
) -> Result<Vec<usize>> {
    let assign = kmeans(embeddings, k, seed, config)?;
    let sims: Vec<f64> = embeddings.iter().map(|e| cosine(e, query)).collect();
    let better = |a: usize, b: usize| sims[a] > sims[b] || (sims[a] == sims[b] && a < b);
    let mut picks = Vec::with_capacity(k);
    let mut taken = vec![false; embeddings.len()];
    for c in 0..k {
        let best = (0..embeddings.len())
            .filter(|&i| assign[i] == c)
            .reduce(|a, b| if better(a, b) { a } else { b });
        if let Some(i) = best {
            picks.push(i);
            taken[i] = true;
        }
    }
    if picks.len() < k {
        let mut rest: Vec<usize> = (0..embeddings.len()).filter(|&i| !taken[i]).collect();
        rest.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
        picks.extend(rest.into_iter().take(k - picks.len()));
    }
    Ok(picks)
}
