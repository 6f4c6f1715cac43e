mod common;

use cad_icl::components::{weighted_intersection, ComponentSet, Granularities};
use cad_icl::selection::{
    brute_force_select, greedy_bound, greedy_select, marginal_gain, tiling_ratio, GreedyOptions, TilingObjective,
    DEFAULT_ORACLE_BUDGET,
};
use cad_icl::Error;
use common::{instance, oracle_value, oracle_weight, toks};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn five_token_hand_example() {
    // query bigrams {ab, bc, cd, de} and 4-grams {abcd, bcde}: weight 2·4 + 4·2
    let inst = common::build(vec![toks("a b c"), toks("x y")], toks("a b c d e"), &[2, 4]);
    assert_eq!(inst.query.weighted_size(), 16);
    assert_eq!(weighted_intersection(&[&inst.db[0]], &inst.query).unwrap(), 4);
    assert_eq!(tiling_ratio(&[0], &inst.db, &inst.query).unwrap(), 0.25);
    assert_eq!(tiling_ratio(&[], &inst.db, &inst.query).unwrap(), 0.0);
    assert_eq!(tiling_ratio(&[1], &inst.db, &inst.query).unwrap(), 0.0);
}

#[test]
fn tiling_ratio_edges() {
    let inst = common::build(vec![toks("a b c d e"), toks("a b")], toks("a b c d e"), &[2, 4]);
    assert_eq!(tiling_ratio(&[0], &inst.db, &inst.query).unwrap(), 1.0);
    assert!(matches!(tiling_ratio(&[7], &inst.db, &inst.query), Err(Error::UnknownExemplar(_))));
    let empty = common::build(vec![toks("a b")], toks("a"), &[2, 4]);
    assert_eq!(tiling_ratio(&[0], &empty.db, &empty.query).unwrap(), 0.0);
}

#[test]
fn greedy_stops_when_covered() {
    let inst = common::build(
        vec![toks("a b c"), toks("a b c d e"), toks("d e")],
        toks("a b c d e"),
        &[2, 4],
    );
    let r = greedy_select(&inst.db, &inst.query, 3, &GreedyOptions::default()).unwrap();
    assert_eq!(r.chosen, vec![1]);
    assert_eq!(r.tiling_ratio, 1.0);
    let filled = greedy_select(
        &inst.db,
        &inst.query,
        3,
        &GreedyOptions {
            lazy: false,
            fill_order: Some(vec![2, 1, 0]),
        },
    )
    .unwrap();
    assert_eq!(filled.chosen, vec![1, 2, 0]);
    assert_eq!(filled.gains, vec![16, 0, 0]);
}

#[test]
fn greedy_contract_errors() {
    let inst = common::build(vec![toks("a b")], toks("a b"), &[2]);
    assert!(matches!(
        greedy_select(&inst.db, &inst.query, 0, &GreedyOptions::default()),
        Err(Error::Contract(_))
    ));
    assert!(matches!(
        greedy_select(&[], &inst.query, 1, &GreedyOptions::default()),
        Err(Error::Selection(_))
    ));
    assert!(matches!(marginal_gain(&[0], 0, &inst.db, &inst.query), Err(Error::Contract(_))));
}

#[test]
fn brute_force_edges_and_budget() {
    let inst = instance(1, 5, &[2, 4]);
    let all = brute_force_select(&inst.db, &inst.query, 9, DEFAULT_ORACLE_BUDGET).unwrap();
    assert_eq!(all.chosen, vec![0, 1, 2, 3, 4]);
    let one = common::build(vec![toks("a b")], toks("a b c"), &[2]);
    assert_eq!(brute_force_select(&one.db, &one.query, 1, 10).unwrap().chosen, vec![0]);
    let big = instance(2, 30, &[2]);
    assert!(matches!(
        brute_force_select(&big.db, &big.query, 10, DEFAULT_ORACLE_BUDGET),
        Err(Error::OracleTooLarge { .. })
    ));
}

#[test]
fn mismatched_granularities_rejected() {
    let a = ComponentSet::from_spec("a b c", &Granularities::new(vec![2]).unwrap());
    let b = ComponentSet::from_spec("a b c", &Granularities::new(vec![2, 4]).unwrap());
    assert!(matches!(weighted_intersection(&[&a], &b), Err(Error::Contract(_))));
    assert!(TilingObjective::new(&[a], &b).is_err());
}

#[test]
fn ten_exemplars_k3_within_bound() {
    for seed in 0..50 {
        let inst = instance(1000 + seed, 10, &[2, 4]);
        let g = greedy_select(&inst.db, &inst.query, 3, &GreedyOptions::default()).unwrap();
        let opt = brute_force_select(&inst.db, &inst.query, 3, DEFAULT_ORACLE_BUDGET).unwrap();
        assert!(opt.covered_weight >= g.covered_weight);
        assert!(g.covered_weight as f64 >= greedy_bound(3) * opt.covered_weight as f64);
    }
}

#[test]
fn selection_is_deterministic() {
    let inst = instance(77, 15, &[2, 4, 8]);
    let a = greedy_select(&inst.db, &inst.query, 4, &GreedyOptions::default()).unwrap();
    let b = greedy_select(&inst.db, &inst.query, 4, &GreedyOptions::default()).unwrap();
    assert_eq!(a, b);
}

fn subset(rng: &mut ChaCha8Rng, pool: &[usize], p: f64) -> Vec<usize> {
    pool.iter().copied().filter(|_| rng.random_bool(p)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn objective_matches_oracle(seed in any::<u64>(), n in 1usize..12) {
        let inst = instance(seed, n, &[2, 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let all: Vec<usize> = (0..n).collect();
        let s = subset(&mut rng, &all, 0.5);
        let obj = TilingObjective::new(&inst.db, &inst.query).unwrap();
        prop_assert_eq!(obj.value(&s).unwrap(), oracle_value(&s, &inst.db_tokens, &inst.query_tokens, &inst.ns));
        prop_assert_eq!(obj.query_weight(), oracle_weight(&inst.query_tokens, &inst.ns));
    }

    #[test]
    fn submodular_axioms(seed in any::<u64>(), n in 2usize..=20) {
        let inst = instance(seed, n, &[2, 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(7));
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let x = idx.pop().unwrap();
        let b = subset(&mut rng, &idx, 0.6);
        let a = subset(&mut rng, &b, 0.5);
        let f = |s: &[usize]| oracle_value(s, &inst.db_tokens, &inst.query_tokens, &inst.ns);
        let (fa, fb) = (f(&a), f(&b));
        prop_assert!(fa <= fb);
        let da = marginal_gain(&a, x, &inst.db, &inst.query).unwrap();
        let db = marginal_gain(&b, x, &inst.db, &inst.query).unwrap();
        let mut ax = a.clone();
        ax.push(x);
        let mut bx = b.clone();
        bx.push(x);
        prop_assert_eq!(da, f(&ax) - fa);
        prop_assert_eq!(db, f(&bx) - fb);
        prop_assert!(da >= db);
    }

    #[test]
    fn lazy_equals_plain(seed in any::<u64>(), n in 1usize..25, k in 1usize..8) {
        let inst = instance(seed, n, &[2, 4, 8]);
        let plain = greedy_select(&inst.db, &inst.query, k, &GreedyOptions { lazy: false, fill_order: None }).unwrap();
        let lazy = greedy_select(&inst.db, &inst.query, k, &GreedyOptions { lazy: true, fill_order: None }).unwrap();
        prop_assert_eq!(plain, lazy);
    }

    #[test]
    fn greedy_trace_and_ratio(seed in any::<u64>(), n in 1usize..20, k in 1usize..6) {
        let inst = instance(seed, n, &[2, 4]);
        let r = greedy_select(&inst.db, &inst.query, k, &GreedyOptions::default()).unwrap();
        prop_assert!(r.chosen.len() <= k);
        prop_assert!((0.0..=1.0).contains(&r.tiling_ratio));
        prop_assert!(r.gains.iter().all(|&g| g > 0));
        prop_assert!(r.gains.windows(2).all(|w| w[0] >= w[1]));
        // cumulative coverage along the trace never decreases
        let mut last = 0;
        for i in 1..=r.chosen.len() {
            let v = oracle_value(&r.chosen[..i], &inst.db_tokens, &inst.query_tokens, &inst.ns);
            prop_assert!(v >= last);
            last = v;
        }
        prop_assert_eq!(last, r.covered_weight);
        prop_assert_eq!(r.tiling_ratio, tiling_ratio(&r.chosen, &inst.db, &inst.query).unwrap());
    }

    #[test]
    fn greedy_within_bound_of_brute_force(seed in any::<u64>(), n in 1usize..=12, k in 1usize..=4) {
        let inst = instance(seed, n, &[2, 4]);
        let g = greedy_select(&inst.db, &inst.query, k, &GreedyOptions::default()).unwrap();
        let opt = brute_force_select(&inst.db, &inst.query, k, DEFAULT_ORACLE_BUDGET).unwrap();
        prop_assert!(opt.covered_weight >= g.covered_weight);
        prop_assert!(g.covered_weight as f64 >= greedy_bound(k) * opt.covered_weight as f64);
        prop_assert_eq!(opt.covered_weight, oracle_value(&opt.chosen, &inst.db_tokens, &inst.query_tokens, &inst.ns));
    }
}
