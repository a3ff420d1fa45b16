use std::collections::HashMap;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fitness, LabeledVectors, TabularError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub genes_per_individual: usize,
    pub rng_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self { population: 2500, generations: 25, crossover_prob: 0.9, mutation_prob: 0.1, genes_per_individual: 5, rng_seed: 0 }
    }
}

impl GaConfig {
    /// Population 50, 10 generations.
    pub fn small(seed: u64) -> Self {
        Self { population: 50, generations: 10, rng_seed: seed, ..Self::default() }
    }

    fn check(&self, width: usize) -> Result<(), TabularError> {
        let bad = |m: String| Err(TabularError::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.crossover_prob) || !(0.0..=1.0).contains(&self.mutation_prob) {
            return bad("probabilities must lie in [0, 1]".into());
        }
        if self.population == 0 || self.genes_per_individual == 0 {
            return bad("population and genes_per_individual must be positive".into());
        }
        if self.genes_per_individual > width {
            return bad(format!("{} genes requested but rows have {width} features", self.genes_per_individual));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSubset {
    /// Sorted, distinct.
    pub indices: Vec<usize>,
    pub fitness: f64,
}

/// One row of the GA log; `best_fitness` is the best seen so far.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
}

pub fn ga_select(data: &LabeledVectors, cfg: &GaConfig) -> Result<FeatureSubset, TabularError> {
    ga_select_logged(data, cfg).map(|(s, _)| s)
}

pub fn ga_select_logged(data: &LabeledVectors, cfg: &GaConfig) -> Result<(FeatureSubset, Vec<GenerationStats>), TabularError> {
    if data.is_empty() {
        return Err(TabularError::EmptyDataset);
    }
    let width = data.width();
    cfg.check(width)?;
    let g = cfg.genes_per_individual;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();

    let mut pop: Vec<Vec<usize>> = (0..cfg.population)
        .map(|_| {
            let mut v = sample(&mut rng, width, g).into_vec();
            v.sort_unstable();
            v
        })
        .collect();
    let mut fit = evaluate(&pop, data, cfg.rng_seed, &mut cache)?;
    let mut best = FeatureSubset { indices: Vec::new(), fitness: f64::NEG_INFINITY };
    let mut log = Vec::with_capacity(cfg.generations + 1);
    record(0, &pop, &fit, &mut best, &mut log);

    for generation in 1..=cfg.generations {
        let elite = (0..pop.len()).fold(0, |b, i| if fit[i] > fit[b] { i } else { b });
        let mut next = vec![pop[elite].clone()];
        while next.len() < cfg.population {
            let a = tournament(&mut rng, &fit);
            let b = tournament(&mut rng, &fit);
            let (mut c1, mut c2) = (pop[a].clone(), pop[b].clone());
            if g > 1 && rng.gen::<f64>() < cfg.crossover_prob {
                let point = rng.gen_range(1..g);
                c1 = pop[a][..point].iter().chain(&pop[b][point..]).copied().collect();
                c2 = pop[b][..point].iter().chain(&pop[a][point..]).copied().collect();
                repair(&mut c1, width, &mut rng);
                repair(&mut c2, width, &mut rng);
            }
            for c in [c1, c2] {
                if next.len() == cfg.population {
                    break;
                }
                let mut c = c;
                if rng.gen::<f64>() < cfg.mutation_prob {
                    mutate(&mut c, width, &mut rng);
                }
                c.sort_unstable();
                next.push(c);
            }
        }
        pop = next;
        fit = evaluate(&pop, data, cfg.rng_seed, &mut cache)?;
        record(generation, &pop, &fit, &mut best, &mut log);
    }
    Ok((best, log))
}

fn record(generation: usize, pop: &[Vec<usize>], fit: &[f64], best: &mut FeatureSubset, log: &mut Vec<GenerationStats>) {
    for (ind, &f) in pop.iter().zip(fit) {
        if f > best.fitness {
            *best = FeatureSubset { indices: ind.clone(), fitness: f };
        }
    }
    let mean = fit.iter().sum::<f64>() / fit.len() as f64;
    log.push(GenerationStats { generation, best_fitness: best.fitness, mean_fitness: mean });
}

/// Fitness of every individual; unseen subsets are scored in parallel.
fn evaluate(
    pop: &[Vec<usize>],
    data: &LabeledVectors,
    seed: u64,
    cache: &mut HashMap<Vec<usize>, f64>,
) -> Result<Vec<f64>, TabularError> {
    let mut todo: Vec<&Vec<usize>> = pop.iter().filter(|i| !cache.contains_key(*i)).collect();
    todo.sort();
    todo.dedup();
    let scored: Vec<(Vec<usize>, f64)> =
        todo.par_iter().map(|i| fitness(i, data, seed).map(|f| ((*i).clone(), f))).collect::<Result<_, _>>()?;
    cache.extend(scored);
    Ok(pop.iter().map(|i| cache[i]).collect())
}

fn tournament(rng: &mut ChaCha8Rng, fit: &[f64]) -> usize {
    let a = rng.gen_range(0..fit.len());
    let b = rng.gen_range(0..fit.len());
    if fit[b] > fit[a] {
        b
    } else {
        a
    }
}

fn unused(genes: &[usize], width: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
    let free: Vec<usize> = (0..width).filter(|f| !genes.contains(f)).collect();
    (!free.is_empty()).then(|| free[rng.gen_range(0..free.len())])
}

/// Replaces later duplicates with random unused indices.
fn repair(genes: &mut [usize], width: usize, rng: &mut ChaCha8Rng) {
    for i in 1..genes.len() {
        if genes[..i].contains(&genes[i]) {
            if let Some(f) = unused(genes, width, rng) {
                genes[i] = f;
            }
        }
    }
}

fn mutate(genes: &mut [usize], width: usize, rng: &mut ChaCha8Rng) {
    let pos = rng.gen_range(0..genes.len());
    if let Some(f) = unused(genes, width, rng) {
        genes[pos] = f;
    }
}

pub fn write_ga_log(path: &Path, log: &[GenerationStats]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for row in log {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::ClassLabel;

    fn planted(seed: u64) -> LabeledVectors {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| (0..10).map(|f| if f == 7 { (i % 2) as f64 } else { rng.gen::<f64>() }).collect())
            .collect();
        let labels = (0..40).map(|i| ClassLabel(format!("c{}", i % 2))).collect();
        LabeledVectors::new(rows, labels).unwrap()
    }

    #[test]
    fn zero_generations_returns_best_initial() {
        let d = planted(1);
        let cfg = GaConfig { generations: 0, population: 6, ..GaConfig::small(2) };
        let (s, log) = ga_select_logged(&d, &cfg).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(s.indices.len(), 5);
        assert_eq!(s.fitness, log[0].best_fitness);
    }

    #[test]
    fn invalid_configs() {
        let d = planted(1);
        for cfg in [
            GaConfig { crossover_prob: 1.5, ..GaConfig::small(0) },
            GaConfig { genes_per_individual: 11, ..GaConfig::small(0) },
            GaConfig { population: 0, ..GaConfig::small(0) },
        ] {
            assert!(matches!(ga_select(&d, &cfg), Err(TabularError::InvalidConfig(_))));
        }
    }

    #[test]
    fn repair_leaves_distinct_genes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut g = vec![3, 3, 3, 1];
        repair(&mut g, 5, &mut rng);
        let mut s = g.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn log_csv_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ga.csv");
        write_ga_log(&p, &[GenerationStats { generation: 0, best_fitness: 0.5, mean_fitness: 0.25 }]).unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "generation,best_fitness,mean_fitness\n0,0.5,0.25\n");
    }
}
