//! Multi-master coverage search: the greedy reduce-and-repeat loop, the
//! per-cluster alternative, and the generator-free centroid coverage bound.

pub mod kmeans;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{self, LatentEmbedder};
use crate::optim::{self, OptimizerKind, OptimizerParams};
use crate::problems::CoverageObjective;
use crate::rng;
use crate::types::{EmbeddingVector, IdentityDataset, LatentVector, MatchThreshold, SimilarityMetric};

/// Ids of identities incorrectly authorized by `emb`.
pub fn find_matched(
    data: &IdentityDataset,
    emb: &EmbeddingVector,
    metric: SimilarityMetric,
    theta: MatchThreshold,
) -> Result<BTreeSet<u32>> {
    Ok(matching::matched_ids(data, emb, metric, theta)?.into_iter().collect())
}

/// How each single-master subproblem is solved.
#[derive(Debug, Clone)]
pub enum MasterOptimizer {
    /// Exhaustive argmax of the match count over a fixed candidate list
    /// (ties keep the earliest candidate). Used by tiny instances and
    /// oracle tests.
    Grid(Vec<LatentVector>),
    /// A budgeted black-box optimizer run.
    Search { kind: OptimizerKind, budget: u64, params: OptimizerParams },
}

impl MasterOptimizer {
    /// Finds one master latent against `data`. `seed` must already be
    /// derived for this subproblem (see [`greedy_coverage`]).
    fn solve(
        &self,
        generator: &dyn LatentEmbedder,
        data: &IdentityDataset,
        metric: SimilarityMetric,
        theta: MatchThreshold,
        seed: u64,
    ) -> Result<LatentVector> {
        match self {
            MasterOptimizer::Grid(candidates) => {
                if candidates.is_empty() {
                    return Err(Error::invalid("grid", "candidate list is empty"));
                }
                let mut best: Option<(usize, &LatentVector)> = None;
                for z in candidates {
                    let emb = generator.embed(z);
                    let count = matching::matched_count(data, &emb, metric, theta)?;
                    let better = match best {
                        Some((c, _)) => count > c,
                        None => true,
                    };
                    if better {
                        best = Some((count, z));
                    }
                }
                Ok(best.expect("nonempty grid").1.clone())
            }
            MasterOptimizer::Search { kind, budget, params } => {
                let objective = CoverageObjective::new(generator, data, metric, theta)?;
                let outcome = optim::minimize(*kind, &objective, *budget, params, seed)?;
                Ok(outcome.best.latent)
            }
        }
    }
}

/// Coverage of one master: the newly covered ids plus this master's MSC
/// against the dataset it was optimized on and against the full dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationCoverage {
    pub matched_ids: BTreeSet<u32>,
    pub msc_reduced: f64,
    pub msc_full: f64,
}

/// Report of a multi-master run. `per_iteration[i].matched_ids` are
/// pairwise disjoint (newly covered identities only), so
/// `cumulative_percent` is exactly `100 · Σ|matched| / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub dataset_size: usize,
    pub masters: Vec<(LatentVector, EmbeddingVector)>,
    pub per_iteration: Vec<IterationCoverage>,
    pub cumulative_percent: f64,
}

impl CoverageReport {
    pub fn covered_total(&self) -> usize {
        self.per_iteration.iter().map(|it| it.matched_ids.len()).sum()
    }
}

/// Greedy coverage: repeatedly optimize one master against the not-yet
/// covered identities, remove what it matched, and continue. Stops early
/// when the dataset empties or after two consecutive zero-gain iterations.
///
/// Per-iteration optimizer seeds are derived as `substream(seed, "master/i")`
/// so iteration 0 is bit-identical to a plain single-master run with the
/// same root seed.
pub fn greedy_coverage(
    generator: &dyn LatentEmbedder,
    data: &IdentityDataset,
    metric: SimilarityMetric,
    theta: MatchThreshold,
    max_iter: usize,
    optimizer: &MasterOptimizer,
    seed: u64,
) -> Result<CoverageReport> {
    if max_iter < 1 {
        return Err(Error::invalid("max_iter", "must be >= 1"));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n_full = data.len();
    let mut reduced = data.clone();
    let mut masters = Vec::new();
    let mut per_iteration = Vec::new();
    let mut zero_gain_streak = 0usize;

    for i in 0..max_iter {
        let master_seed = rng::derive_seed(seed, &format!("master/{i}"));
        let z = optimizer.solve(generator, &reduced, metric, theta, master_seed)?;
        let emb = generator.embed(&z);
        let matched = find_matched(&reduced, &emb, metric, theta)?;
        let msc_reduced = 100.0 * matched.len() as f64 / reduced.len() as f64;
        let msc_full = matching::msc_score(&emb, data, metric, theta)?;
        masters.push((z, emb));
        per_iteration.push(IterationCoverage { matched_ids: matched.clone(), msc_reduced, msc_full });

        if matched.is_empty() {
            zero_gain_streak += 1;
            if zero_gain_streak >= 2 {
                log::info!(
                    "greedy_coverage: stopping after iteration {i}: two consecutive iterations \
                     covered no new identities"
                );
                break;
            }
        } else {
            zero_gain_streak = 0;
        }

        if matched.len() == reduced.len() {
            // everything covered
            break;
        }
        if !matched.is_empty() {
            reduced = reduced.without(&matched)?;
        }
    }

    let covered: usize = per_iteration.iter().map(|it| it.matched_ids.len()).sum();
    Ok(CoverageReport {
        dataset_size: n_full,
        masters,
        per_iteration,
        cumulative_percent: 100.0 * covered as f64 / n_full as f64,
    })
}

/// Generator-free coverage bound: cluster the embeddings, then count
/// identities whose distance to the nearest centroid is below θ. This is
/// what an ideal dictionary could cover if embeddings did not have to be
/// realized through the generator.
pub fn kmeans_coverage_bound(
    data: &IdentityDataset,
    k: usize,
    metric: SimilarityMetric,
    theta: MatchThreshold,
    restarts: usize,
    seed: u64,
) -> Result<(Vec<EmbeddingVector>, f64)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut stream = rng::substream(seed, "kmeans-bound");
    let result = kmeans::kmeans(data.embeddings(), k, restarts, &mut stream)?;
    let centroids: Vec<EmbeddingVector> =
        result.centroids.into_iter().map(EmbeddingVector::new).collect();
    let mut covered = 0usize;
    for (_, emb) in data.iter() {
        let mut is_covered = false;
        for c in &centroids {
            if matching::matches(emb, c, metric, theta)? {
                is_covered = true;
                break;
            }
        }
        if is_covered {
            covered += 1;
        }
    }
    Ok((centroids, 100.0 * covered as f64 / data.len() as f64))
}

/// Per-cluster alternative: partition identities by nearest centroid, run
/// one single-master optimization per cluster against that cluster only,
/// and report union coverage over the full dataset (each master may also
/// match identities outside its cluster; `matched_ids` keeps only the
/// newly covered ones so the union is counted once).
pub fn cluster_partition_coverage(
    generator: &dyn LatentEmbedder,
    data: &IdentityDataset,
    k: usize,
    metric: SimilarityMetric,
    theta: MatchThreshold,
    optimizer: &MasterOptimizer,
    seed: u64,
) -> Result<CoverageReport> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut stream = rng::substream(seed, "kmeans-partition");
    let clustering = kmeans::kmeans(data.embeddings(), k, kmeans::DEFAULT_RESTARTS, &mut stream)?;

    let mut cluster_ids: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); k];
    for ((id, _), &assignment) in data.iter().zip(&clustering.assignments) {
        cluster_ids[assignment].insert(id);
    }

    let n_full = data.len();
    let mut masters = Vec::new();
    let mut per_iteration = Vec::new();
    let mut already: BTreeSet<u32> = BTreeSet::new();

    for (i, members) in cluster_ids.iter().enumerate() {
        if members.is_empty() {
            log::warn!("cluster_partition_coverage: cluster {i} is empty, skipped");
            continue;
        }
        let cluster_data = data.subset(members)?;
        let master_seed = rng::derive_seed(seed, &format!("master/{i}"));
        let z = optimizer.solve(generator, &cluster_data, metric, theta, master_seed)?;
        let emb = generator.embed(&z);

        let in_cluster = find_matched(&cluster_data, &emb, metric, theta)?;
        let msc_reduced = 100.0 * in_cluster.len() as f64 / cluster_data.len() as f64;
        let over_full = find_matched(data, &emb, metric, theta)?;
        let msc_full = 100.0 * over_full.len() as f64 / n_full as f64;
        let new_ids: BTreeSet<u32> = over_full.difference(&already).copied().collect();
        already.extend(new_ids.iter().copied());

        masters.push((z, emb));
        per_iteration.push(IterationCoverage { matched_ids: new_ids, msc_reduced, msc_full });
    }

    Ok(CoverageReport {
        dataset_size: n_full,
        masters,
        per_iteration,
        cumulative_percent: 100.0 * already.len() as f64 / n_full as f64,
    })
}
