//! Seeded stratified k-fold assignment shared by GA fitness and evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Partitions `0..keys.len()` into `k` folds.
///
/// Items are ordered by `(label, id)`, shuffled within each label from
/// `seed`, then dealt round-robin with one counter running across labels.
/// Per-label counts per fold and total fold sizes then differ by at most one,
/// and the result depends only on the multiset of keys, not their order.
/// Each fold lists positions into `keys`, ascending.
pub fn stratified_folds<L: Ord>(keys: &[(L, &str)], k: usize, seed: u64) -> Vec<Vec<usize>> {
    assert!(k >= 1, "fold count must be positive");
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].0.cmp(&keys[b].0).then_with(|| keys[a].1.cmp(keys[b].1)).then(a.cmp(&b)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut counter = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && keys[order[end]].0 == keys[order[start]].0 {
            end += 1;
        }
        let group = &mut order[start..end];
        group.shuffle(&mut rng);
        for &i in group.iter() {
            folds[counter % k].push(i);
            counter += 1;
        }
        start = end;
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}
