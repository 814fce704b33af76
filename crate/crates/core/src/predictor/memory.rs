//! Finite candidate memory with random eviction that protects the best
//! entry, plus nearest-rank percentile labeling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{Candidate, LatentVector};

/// Fixed-capacity store of evaluated `(latent, fitness)` pairs.
///
/// When over capacity, uniformly random entries are evicted, never the one
/// with the minimum fitness.
#[derive(Debug, Clone)]
pub struct CandidateMemory {
    entries: Vec<(LatentVector, f64)>,
    capacity: usize,
    best_index: usize,
}

impl CandidateMemory {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity < 1 {
            return Err(Error::invalid("capacity", "must be >= 1"));
        }
        Ok(CandidateMemory { entries: Vec::new(), capacity, best_index: 0 })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> &[(LatentVector, f64)] {
        &self.entries
    }

    pub fn best_index(&self) -> usize {
        self.best_index
    }

    pub fn best_fitness(&self) -> Option<f64> {
        self.entries.get(self.best_index).map(|(_, f)| *f)
    }

    /// Appends evaluated candidates, then evicts uniformly random non-best
    /// entries until the capacity holds again.
    pub fn insert(&mut self, candidates: &[Candidate], rng: &mut ChaCha8Rng) -> Result<()> {
        for c in candidates {
            let fitness = c.fitness_checked()?;
            self.entries.push((c.latent.clone(), fitness));
            // ties keep the earliest entry as best
            if self.entries.len() == 1 || fitness < self.entries[self.best_index].1 {
                self.best_index = self.entries.len() - 1;
            }
        }
        while self.entries.len() > self.capacity {
            // uniform over all indices except the best
            let k = rng.random_range(0..self.entries.len() - 1);
            let victim = if k < self.best_index { k } else { k + 1 };
            self.entries.swap_remove(victim);
            if self.best_index == self.entries.len() {
                // the best was the last element and moved into the hole
                self.best_index = victim;
            }
        }
        debug_assert!(self.check_invariants());
        Ok(())
    }

    /// Nearest-rank percentile of stored fitness values: the k-th smallest
    /// with `k = ceil(p/100 · N)`.
    pub fn percentile_threshold(&self, p: f64) -> Result<f64> {
        if self.entries.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !(p > 0.0 && p <= 100.0) {
            return Err(Error::invalid("p", format!("percentile must be in (0, 100], got {p}")));
        }
        let mut fits: Vec<f64> = self.entries.iter().map(|(_, f)| *f).collect();
        fits.sort_by(|a, b| a.partial_cmp(b).expect("finite fitness"));
        let k = ((p / 100.0) * fits.len() as f64).ceil() as usize;
        Ok(fits[k.max(1) - 1])
    }

    /// Labels every entry: 1 iff its fitness is strictly below the
    /// p-percentile threshold. Recomputed from scratch on every call.
    pub fn labels(&self, p: f64) -> Result<Vec<bool>> {
        let threshold = self.percentile_threshold(p)?;
        Ok(self.entries.iter().map(|(_, f)| *f < threshold).collect())
    }

    fn check_invariants(&self) -> bool {
        if self.entries.len() > self.capacity {
            return false;
        }
        if self.entries.is_empty() {
            return true;
        }
        let min = self.entries.iter().map(|(_, f)| *f).fold(f64::INFINITY, f64::min);
        self.entries[self.best_index].1 == min
    }
}
