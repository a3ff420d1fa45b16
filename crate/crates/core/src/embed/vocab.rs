use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Deterministic token -> vector table.
///
/// The vector for a token is `dim` uniform draws in [-1, 1) from a ChaCha8
/// stream seeded with `sha256(seed_le || token)`, so it depends on nothing
/// but `(seed, dim, token)`. Entries are materialized on first use.
#[derive(Debug)]
pub struct SeedVocab {
    dim: usize,
    seed: u64,
    entries: RwLock<HashMap<String, Arc<[f64]>>>,
}

impl Clone for SeedVocab {
    fn clone(&self) -> Self {
        let entries = self.entries.read().expect("vocab lock").clone();
        Self { dim: self.dim, seed: self.seed, entries: RwLock::new(entries) }
    }
}

pub fn seed_vocabulary(seed: u64, dim: usize) -> SeedVocab {
    SeedVocab::new(seed, dim)
}

/// Maps a raw 64-bit draw to [-1, 1) using its top 53 bits.
fn unit_interval(u: u64) -> f64 {
    (u >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * 2.0 - 1.0
}

impl SeedVocab {
    pub fn new(seed: u64, dim: usize) -> Self {
        assert!(dim >= 1, "vocabulary dimension must be positive");
        Self { dim, seed, entries: RwLock::new(HashMap::new()) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn generate(&self, token: &str) -> Arc<[f64]> {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(token.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(key);
        (0..self.dim).map(|_| unit_interval(rng.next_u64())).collect()
    }

    pub fn vector(&self, token: &str) -> Arc<[f64]> {
        if let Some(v) = self.entries.read().expect("vocab lock").get(token) {
            return Arc::clone(v);
        }
        let v = self.generate(token);
        let mut w = self.entries.write().expect("vocab lock");
        Arc::clone(w.entry(token.to_string()).or_insert(v))
    }

    /// Number of materialized entries.
    pub fn len(&self) -> usize {
        self.entries.read().expect("vocab lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let a = seed_vocabulary(1, 256);
        let b = seed_vocabulary(1, 256);
        let va = a.vector("add");
        assert_eq!(va.len(), 256);
        assert_eq!(va.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.vector("add").iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert!(va.iter().all(|x| (-1.0..1.0).contains(x)));
        assert_eq!(a.len(), 1);
        a.vector("add");
        assert_eq!(a.len(), 1);
    }

    #[test]
    fn seed_and_token_both_matter() {
        let one = seed_vocabulary(1, 256);
        let two = seed_vocabulary(2, 256);
        assert_ne!(one.vector("add"), two.vector("add"));
        assert_ne!(one.vector("add"), one.vector("mul"));
    }

    #[test]
    fn unit_interval_edges() {
        assert_eq!(unit_interval(0), -1.0);
        assert!(unit_interval(u64::MAX) < 1.0);
    }
}
