//! The tiling objective and its maximization.
//!
//! For a query component set `C_q` and a database of exemplar component
//! sets `C_i`, the objective of a selection `S` is the covered weight
//! `f(S) = w((∪_{i∈S} C_i) ∩ C_q)` and the tiling ratio is `f(S) / w(C_q)`.
//! `f` is non-negative, monotone and submodular, so greedy maximization is
//! within `1 − (1 − 1/k)^k` of the optimum.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::components::{weighted_intersection, ComponentSet};
use crate::error::{Error, Result};

/// Outcome of any selector: picks in order plus coverage bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Database indices in pick order.
    pub chosen: Vec<usize>,
    /// Covered-weight increment contributed by each pick, in pick order.
    pub gains: Vec<u64>,
    pub covered_weight: u64,
    pub query_weight: u64,
    pub tiling_ratio: f64,
}

impl SelectionResult {
    /// Assemble a result for an externally chosen ordering, computing the
    /// per-pick coverage increments.
    pub fn from_order(objective: &TilingObjective, chosen: Vec<usize>) -> Result<Self> {
        let mut cover = objective.cover();
        let mut gains = Vec::with_capacity(chosen.len());
        for &i in &chosen {
            gains.push(cover.add(i)?);
        }
        Ok(cover.into_result(chosen, gains))
    }
}

/// `1 − (1 − 1/k)^k`, the greedy guarantee under a cardinality budget `k`.
pub fn greedy_bound(k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    1.0 - (1.0 - 1.0 / k as f64).powi(k as i32)
}

fn check_index(db_len: usize, i: usize) -> Result<()> {
    if i >= db_len {
        return Err(Error::UnknownExemplar(format!("index {i} (database has {db_len})")));
    }
    Ok(())
}

/// `w(C(S) ∩ C_q) / w(C_q)`, computed from scratch; 0 when the query has no
/// components.
pub fn tiling_ratio(selection: &[usize], db: &[ComponentSet], query: &ComponentSet) -> Result<f64> {
    let sets = selection
        .iter()
        .map(|&i| check_index(db.len(), i).map(|_| &db[i]))
        .collect::<Result<Vec<_>>>()?;
    let total = query.weighted_size();
    if total == 0 {
        return Ok(0.0);
    }
    Ok(weighted_intersection(&sets, query)? as f64 / total as f64)
}

/// Query components flattened into weighted slots, and each exemplar's
/// overlap with the query expressed as slot indices.
#[derive(Debug, Clone)]
pub struct TilingObjective {
    slot_weight: Vec<u64>,
    overlaps: Vec<Vec<u32>>,
    query_weight: u64,
}

impl TilingObjective {
    pub fn new(db: &[ComponentSet], query: &ComponentSet) -> Result<Self> {
        let mut slots: Vec<HashMap<&str, u32>> = Vec::new();
        let mut slot_weight = Vec::new();
        for (n, set) in query.iter() {
            let mut map = HashMap::with_capacity(set.len());
            for gram in set {
                map.insert(gram.as_str(), slot_weight.len() as u32);
                slot_weight.push(n as u64);
            }
            slots.push(map);
        }
        let overlaps = db
            .par_iter()
            .map(|cs| {
                if cs.granularities() != query.granularities() {
                    return Err(Error::Contract(
                        "component sets built with different granularities".into(),
                    ));
                }
                let mut hit: Vec<u32> = cs
                    .iter()
                    .zip(&slots)
                    .flat_map(|((_, set), map)| set.iter().filter_map(|g| map.get(g.as_str()).copied()))
                    .collect();
                hit.sort_unstable();
                Ok(hit)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TilingObjective {
            query_weight: slot_weight.iter().sum(),
            slot_weight,
            overlaps,
        })
    }

    pub fn len(&self) -> usize {
        self.overlaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.overlaps.is_empty()
    }

    pub fn query_weight(&self) -> u64 {
        self.query_weight
    }

    /// Weight of exemplar `i`'s overlap with the query on its own.
    pub fn own_weight(&self, i: usize) -> u64 {
        self.overlaps[i].iter().map(|&s| self.slot_weight[s as usize]).sum()
    }

    pub fn cover(&self) -> Coverage<'_> {
        Coverage {
            objective: self,
            covered: vec![false; self.slot_weight.len()],
            weight: 0,
        }
    }

    /// Covered weight of an arbitrary selection.
    pub fn value(&self, selection: &[usize]) -> Result<u64> {
        let mut cover = self.cover();
        for &i in selection {
            cover.add(i)?;
        }
        Ok(cover.weight)
    }
}

/// Which query slots a growing selection has covered.
#[derive(Debug, Clone)]
pub struct Coverage<'a> {
    objective: &'a TilingObjective,
    covered: Vec<bool>,
    weight: u64,
}

impl Coverage<'_> {
    /// `Δ(x)`: weight of `x`'s query overlap not yet covered.
    pub fn gain(&self, x: usize) -> u64 {
        self.objective.overlaps[x]
            .iter()
            .filter(|&&s| !self.covered[s as usize])
            .map(|&s| self.objective.slot_weight[s as usize])
            .sum()
    }

    pub fn add(&mut self, x: usize) -> Result<u64> {
        check_index(self.objective.len(), x)?;
        let mut gained = 0;
        for &s in &self.objective.overlaps[x] {
            let slot = &mut self.covered[s as usize];
            if !*slot {
                *slot = true;
                gained += self.objective.slot_weight[s as usize];
            }
        }
        self.weight += gained;
        Ok(gained)
    }

    pub fn weight(&self) -> u64 {
        self.weight
    }

    fn into_result(self, chosen: Vec<usize>, gains: Vec<u64>) -> SelectionResult {
        let q = self.objective.query_weight;
        SelectionResult {
            chosen,
            gains,
            covered_weight: self.weight,
            query_weight: q,
            tiling_ratio: if q == 0 { 0.0 } else { self.weight as f64 / q as f64 },
        }
    }
}

/// `f(S ∪ {x}) − f(S)` via coverage bookkeeping.
pub fn marginal_gain(
    selection: &[usize],
    x: usize,
    db: &[ComponentSet],
    query: &ComponentSet,
) -> Result<u64> {
    check_index(db.len(), x)?;
    if selection.contains(&x) {
        return Err(Error::Contract(format!("candidate {x} is already selected")));
    }
    let objective = TilingObjective::new(db, query)?;
    let mut cover = objective.cover();
    for &i in selection {
        cover.add(i)?;
    }
    Ok(cover.gain(x))
}

#[derive(Debug, Clone, Default)]
pub struct GreedyOptions {
    /// Use the priority-queue (lazy) evaluation; results are identical to
    /// the plain scan.
    pub lazy: bool,
    /// When set, picks that stop early are topped up to exactly `k` from
    /// this ranking (typically BM25 order), skipping already chosen indices.
    pub fill_order: Option<Vec<usize>>,
}

/// Greedy maximization of the covered weight. Each step takes the largest
/// marginal gain, lowest index on ties, and stops at `k` picks or when no
/// candidate adds positive weight.
pub fn greedy_select(
    db: &[ComponentSet],
    query: &ComponentSet,
    k: usize,
    options: &GreedyOptions,
) -> Result<SelectionResult> {
    let objective = TilingObjective::new(db, query)?;
    greedy_with(&objective, k, options)
}

pub fn greedy_with(
    objective: &TilingObjective,
    k: usize,
    options: &GreedyOptions,
) -> Result<SelectionResult> {
    if k == 0 {
        return Err(Error::Contract("k must be at least 1".into()));
    }
    if objective.is_empty() {
        return Err(Error::Selection("exemplar database is empty".into()));
    }
    let (mut chosen, mut gains, mut cover) = if options.lazy {
        lazy_greedy(objective, k)
    } else {
        plain_greedy(objective, k)
    };
    if let Some(order) = &options.fill_order {
        let mut taken = vec![false; objective.len()];
        for &i in &chosen {
            taken[i] = true;
        }
        for &i in order {
            if chosen.len() >= k.min(objective.len()) {
                break;
            }
            check_index(objective.len(), i)?;
            if !taken[i] {
                taken[i] = true;
                gains.push(cover.add(i)?);
                chosen.push(i);
            }
        }
    }
    Ok(cover.into_result(chosen, gains))
}

fn plain_greedy(objective: &TilingObjective, k: usize) -> (Vec<usize>, Vec<u64>, Coverage<'_>) {
    let mut cover = objective.cover();
    let mut taken = vec![false; objective.len()];
    let mut chosen = Vec::new();
    let mut gains = Vec::new();
    while chosen.len() < k {
        let best = (0..objective.len())
            .into_par_iter()
            .filter(|&i| !taken[i])
            .map(|i| (cover.gain(i), i))
            .reduce_with(|a, b| match a.0.cmp(&b.0) {
                Ordering::Greater => a,
                Ordering::Less => b,
                Ordering::Equal => if a.1 <= b.1 { a } else { b },
            });
        match best {
            Some((g, i)) if g > 0 => {
                taken[i] = true;
                cover.add(i).expect("index in range");
                chosen.push(i);
                gains.push(g);
            }
            _ => break,
        }
    }
    (chosen, gains, cover)
}

#[derive(PartialEq, Eq)]
struct Bound {
    gain: u64,
    index: usize,
    round: usize,
}

impl Ord for Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .cmp(&other.gain)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Stale gains are upper bounds by submodularity. The top entry is accepted
// once it has been refreshed in the current round; heap order (gain desc,
// index asc) then guarantees it is the lowest-index argmax.
fn lazy_greedy(objective: &TilingObjective, k: usize) -> (Vec<usize>, Vec<u64>, Coverage<'_>) {
    let mut cover = objective.cover();
    let mut heap: BinaryHeap<Bound> = (0..objective.len())
        .map(|i| Bound {
            gain: objective.own_weight(i),
            index: i,
            round: 0,
        })
        .collect();
    let mut chosen = Vec::new();
    let mut gains = Vec::new();
    while chosen.len() < k {
        let round = chosen.len();
        let Some(top) = heap.pop() else { break };
        if top.gain == 0 {
            break;
        }
        if top.round == round {
            cover.add(top.index).expect("index in range");
            chosen.push(top.index);
            gains.push(top.gain);
        } else {
            heap.push(Bound {
                gain: cover.gain(top.index),
                index: top.index,
                round,
            });
        }
    }
    (chosen, gains, cover)
}

pub const DEFAULT_ORACLE_BUDGET: u128 = 1_000_000;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Exhaustive maximization over all subsets of size `min(k, n)` in
/// lexicographic order, keeping the first maximum. Because the objective is
/// monotone this is also the optimum over subsets of size at most `k`.
pub fn brute_force_select(
    db: &[ComponentSet],
    query: &ComponentSet,
    k: usize,
    budget: u128,
) -> Result<SelectionResult> {
    let objective = TilingObjective::new(db, query)?;
    brute_force_with(&objective, k, budget)
}

pub fn brute_force_with(objective: &TilingObjective, k: usize, budget: u128) -> Result<SelectionResult> {
    let n = objective.len();
    if n == 0 {
        return Err(Error::Selection("exemplar database is empty".into()));
    }
    let m = k.min(n);
    let count = binomial(n, m);
    if count > budget {
        return Err(Error::OracleTooLarge { n, k: m, count, budget });
    }
    let mut combo: Vec<usize> = (0..m).collect();
    let mut best: Option<(u64, Vec<usize>)> = None;
    loop {
        let v = objective.value(&combo)?;
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, combo.clone()));
        }
        // next combination in lexicographic order
        let mut i = m;
        loop {
            if i == 0 {
                let (_, chosen) = best.expect("at least one subset");
                return SelectionResult::from_order(objective, chosen);
            }
            i -= 1;
            if combo[i] < n - m + i {
                combo[i] += 1;
                for j in i + 1..m {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}
