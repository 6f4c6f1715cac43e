#![allow(dead_code)]

use std::collections::HashSet;
use std::path::PathBuf;

use cad_icl::components::{ComponentSet, Granularities};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Word windows of length `n`, written out by hand.
pub fn windows(tokens: &[String], n: usize) -> HashSet<String> {
    let mut out = HashSet::new();
    if tokens.len() >= n {
        for i in 0..=tokens.len() - n {
            out.insert(tokens[i..i + n].join(" "));
        }
    }
    out
}

/// Covered weight of `selection` for `query`, recomputed from raw tokens.
pub fn oracle_value(selection: &[usize], db: &[Vec<String>], query: &[String], ns: &[usize]) -> u64 {
    let mut total = 0u64;
    for &n in ns {
        let q = windows(query, n);
        let mut covered: HashSet<String> = HashSet::new();
        for &i in selection {
            covered.extend(windows(&db[i], n).into_iter().filter(|g| q.contains(g)));
        }
        total += n as u64 * covered.len() as u64;
    }
    total
}

pub fn oracle_weight(tokens: &[String], ns: &[usize]) -> u64 {
    ns.iter().map(|&n| n as u64 * windows(tokens, n).len() as u64).sum()
}

/// A random small instance over a tiny vocabulary so specs overlap.
pub struct Instance {
    pub db_tokens: Vec<Vec<String>>,
    pub query_tokens: Vec<String>,
    pub ns: Vec<usize>,
    pub db: Vec<ComponentSet>,
    pub query: ComponentSet,
}

pub fn random_tokens(rng: &mut ChaCha8Rng, vocab: usize, len: std::ops::RangeInclusive<usize>) -> Vec<String> {
    let l = rng.random_range(len);
    (0..l).map(|_| format!("w{}", rng.random_range(0..vocab))).collect()
}

pub fn instance(seed: u64, n: usize, ns: &[usize]) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = rng.random_range(3..=6);
    let query_tokens = random_tokens(&mut rng, vocab, 4..=14);
    let db_tokens: Vec<Vec<String>> = (0..n).map(|_| random_tokens(&mut rng, vocab, 2..=10)).collect();
    build(db_tokens, query_tokens, ns)
}

pub fn build(db_tokens: Vec<Vec<String>>, query_tokens: Vec<String>, ns: &[usize]) -> Instance {
    let g = Granularities::new(ns.to_vec()).unwrap();
    let db = db_tokens.iter().map(|t| ComponentSet::from_spec(&t.join(" "), &g)).collect();
    let query = ComponentSet::from_spec(&query_tokens.join(" "), &g);
    Instance {
        db_tokens,
        query_tokens,
        ns: ns.to_vec(),
        db,
        query,
    }
}

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

use cad_icl::geometry::rotation::apply;
use cad_icl::geometry::shapes::{Primitive, Solid};
use cad_icl::geometry::{GeometryArtifact, Rot};

/// An L-shaped bracket with a bore: no rotational symmetry, so exactly one
/// of the 24 axis rotations fits it back onto itself.
pub fn bracket(rng: &mut ChaCha8Rng) -> Solid {
    let (l, w, t) = (rng.random_range(30.0..60.0), rng.random_range(15.0..30.0), rng.random_range(4.0..8.0));
    let h = rng.random_range(20.0..40.0);
    Solid {
        add: vec![
            Primitive::Cuboid {
                center: [0.0, 0.0, t / 2.0],
                size: [l, w, t],
            },
            Primitive::Cuboid {
                center: [-l / 2.0 + t / 2.0, 0.0, h / 2.0],
                size: [t, w, h],
            },
        ],
        subtract: vec![Primitive::Cylinder {
            center: [l / 4.0, 0.0, t / 2.0],
            radius: w / 5.0,
            height: t * 2.0,
        }],
    }
}

/// `p ↦ scale · R p + shift` applied to every sample, grid rebuilt.
pub fn rigid_image(a: &GeometryArtifact, rot: &Rot, scale: f64, shift: [f64; 3]) -> GeometryArtifact {
    let f = |p: &[f64; 3]| {
        let r = apply(rot, p);
        [scale * r[0] + shift[0], scale * r[1] + shift[1], scale * r[2] + shift[2]]
    };
    let (surface, edges) = a.map_points(f);
    GeometryArtifact::from_samples(surface, edges, a.voxels.resolution, 2).unwrap()
}

/// Brute-force Chamfer distance.
pub fn chamfer_oracle(p: &[[f64; 3]], q: &[[f64; 3]]) -> f64 {
    let d = |a: &[f64; 3], b: &[f64; 3]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
    let one_way = |from: &[[f64; 3]], to: &[[f64; 3]]| {
        from.iter()
            .map(|a| to.iter().map(|b| d(a, b)).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / from.len() as f64
    };
    0.5 * one_way(p, q) + 0.5 * one_way(q, p)
}
