mod common;

use mpisentinel_core::tabular::{fitness, ga_select, ga_select_logged, train_tree, GaConfig, LabeledVectors};
use common::oracles::{labels_of, planted};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exhaustive CART: every feature, every midpoint, Gini counted from scratch.
enum Oracle {
    Leaf(usize),
    Split(usize, f64, Box<Oracle>, Box<Oracle>),
}

fn gini_sum(rows: &[(Vec<f64>, usize)], k: usize) -> f64 {
    let n = rows.len() as f64;
    if rows.is_empty() {
        return 0.0;
    }
    let p: f64 = (0..k).map(|c| (rows.iter().filter(|r| r.1 == c).count() as f64 / n).powi(2)).sum();
    n * (1.0 - p)
}

fn oracle(rows: Vec<(Vec<f64>, usize)>, k: usize) -> Oracle {
    let counts: Vec<usize> = (0..k).map(|c| rows.iter().filter(|r| r.1 == c).count()).collect();
    let majority = (0..k).rev().max_by_key(|&c| counts[c]).unwrap();
    if counts.iter().filter(|&&c| c > 0).count() <= 1 || rows.len() < 2 {
        return Oracle::Leaf(majority);
    }
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..rows[0].0.len() {
        let mut vals: Vec<f64> = rows.iter().map(|r| r.0[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = w[0] / 2.0 + w[1] / 2.0;
            let (l, r): (Vec<_>, Vec<_>) = rows.iter().cloned().partition(|x| x.0[f] <= t);
            let s = gini_sum(&l, k) + gini_sum(&r, k);
            if best.map_or(true, |b| s < b.0 - 1e-12) {
                best = Some((s, f, t));
            }
        }
    }
    match best {
        None => Oracle::Leaf(majority),
        Some((_, f, t)) => {
            let (l, r): (Vec<_>, Vec<_>) = rows.into_iter().partition(|x| x.0[f] <= t);
            Oracle::Split(f, t, Box::new(oracle(l, k)), Box::new(oracle(r, k)))
        }
    }
}

fn oracle_predict(o: &Oracle, x: &[f64]) -> usize {
    match o {
        Oracle::Leaf(c) => *c,
        Oracle::Split(f, t, l, r) => oracle_predict(if x[*f] <= *t { l } else { r }, x),
    }
}

#[test]
fn tree_matches_exhaustive_cart_oracle() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // coarse grid so that split ties actually occur
        let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..4).map(|_| rng.gen_range(0..6) as f64 * 0.5).collect()).collect();
        let y: Vec<usize> = rows.iter().map(|r| if r[1] + r[3] > 2.5 || rng.gen_bool(0.15) { 2 } else { (r[0] > 1.0) as usize }).collect();
        let data = LabeledVectors::new(rows.clone(), labels_of(&y)).unwrap();
        let tree = train_tree(&data).unwrap();
        let o = oracle(rows.iter().cloned().zip(y.iter().copied()).collect(), 3);
        for probe in rows.iter().chain(&[vec![0.25; 4], vec![3.0, 0.0, 3.0, 0.0]]) {
            assert_eq!(tree.predict(probe).unwrap(), &data.label_space[oracle_predict(&o, probe)], "seed {seed}");
        }
    }
}

#[test]
fn fitness_of_noise_is_near_chance() {
    let mean: f64 = (0..20)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
            let y: Vec<usize> = (0..60).map(|i| i % 2).collect();
            fitness(&[0, 1, 2], &LabeledVectors::new(rows, labels_of(&y)).unwrap(), seed).unwrap()
        })
        .sum::<f64>()
        / 20.0;
    assert!((mean - 0.5).abs() <= 0.15, "mean fitness {mean}");
}

#[test]
fn only_subsets_with_feature_seven_are_perfect() {
    let d = planted(7);
    for mask in 0u32..1024 {
        if mask.count_ones() != 5 {
            continue;
        }
        let subset: Vec<usize> = (0..10).filter(|b| mask >> b & 1 == 1).collect();
        let f = fitness(&subset, &d, 7).unwrap();
        assert_eq!(f == 1.0, subset.contains(&7), "{subset:?} -> {f}");
    }
}

#[test]
fn ga_finds_planted_feature() {
    for seed in 0..5 {
        let d = planted(seed);
        let (s, log) = ga_select_logged(&d, &GaConfig::small(seed)).unwrap();
        assert!(s.indices.contains(&7), "seed {seed}: {s:?}");
        assert_eq!(s.fitness, 1.0);
        assert_eq!(log.len(), 11);
        assert!(log.windows(2).all(|w| w[1].best_fitness >= w[0].best_fitness));
        assert!(s.indices.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn ga_is_deterministic() {
    let d = planted(3);
    let cfg = GaConfig { population: 20, generations: 4, ..GaConfig::small(11) };
    assert_eq!(ga_select(&d, &cfg).unwrap(), ga_select(&d, &cfg).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distinct_rows_are_fit_perfectly(raw in prop::collection::vec((prop::collection::vec(0u8..4, 3), 0usize..3), 1..40)) {
        let mut seen = std::collections::HashMap::new();
        let pairs: Vec<(Vec<f64>, usize)> = raw
            .into_iter()
            .filter(|(r, y)| *seen.entry(r.clone()).or_insert(*y) == *y)
            .map(|(r, y)| (r.into_iter().map(f64::from).collect(), y))
            .collect();
        let ys: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let data = LabeledVectors::new(pairs.iter().map(|p| p.0.clone()).collect(), labels_of(&ys)).unwrap();
        let tree = train_tree(&data).unwrap();
        for (row, label) in data.rows.iter().zip(&data.labels) {
            prop_assert_eq!(tree.predict(row).unwrap(), label);
        }
    }

    #[test]
    fn fitness_ignores_row_order(seed in 0u64..1000, perm_seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 23;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen_range(0..4) as f64).collect()).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let ids: Vec<String> = (0..n).map(|i| format!("id{i}")).collect();
        let a = LabeledVectors::with_ids(rows.clone(), labels_of(&y), ids.clone()).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut ChaCha8Rng::seed_from_u64(perm_seed));
        let b = a.select_rows(&order);
        prop_assert_eq!(fitness(&[0, 2], &a, seed).unwrap(), fitness(&[0, 2], &b, seed).unwrap());
    }
}
