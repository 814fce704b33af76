//! The success predictor: a finite candidate memory, an online-trained
//! binary classifier over latent vectors, softmax filtering of a large
//! generated pool down to the evaluated population, and an accuracy monitor
//! that re-initializes the classifier when it stops being informative.
//!
//! The assisted loop generates λ′ ≫ λ candidates per iteration, evaluates
//! only the λ the classifier favors, and trains the classifier after every
//! iteration on the memory of recently evaluated candidates, labeled by
//! whether their fitness beats the running p-percentile.

mod classifier;
mod filter;
mod memory;
mod monitor;

pub use classifier::{ForwardMode, Gradients, NeuralClassifier, DEFAULT_HIDDEN_1, DEFAULT_HIDDEN_2};
pub use filter::{filter_candidates, select_by_scores, softmax, FilteredPopulation};
pub use memory::CandidateMemory;
pub use monitor::{AccuracyMonitor, MonitorOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::lmmaes::{default_lambda, LmMaEsState};
use crate::optim::{evaluate_batch, BestTracker, Objective, RunOutcome, TraceRow};
use crate::rng;
use crate::types::{Candidate, LatentVector};

/// Tunables of the success predictor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorConfig {
    /// Percentile (of memory fitness) defining the promising class.
    pub percentile: f64,
    /// Pool size generated per iteration before filtering.
    pub lambda_prime: usize,
    /// Memory capacity.
    pub capacity: usize,
    /// Fraction of iterations spent training without filtering.
    pub warmup_fraction: f64,
    /// Adam learning rate.
    pub learning_rate: f64,
    /// Minibatch size.
    pub minibatch: usize,
    /// Accuracy threshold of the monitor.
    pub tau_acc: f64,
    /// Consecutive low-accuracy iterations that trigger re-initialization.
    pub reset_patience: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            percentile: 5.0,
            lambda_prime: 1000,
            capacity: 5000,
            warmup_fraction: 0.05,
            learning_rate: 0.001,
            minibatch: 32,
            tau_acc: 0.6,
            reset_patience: 20,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self, lambda: usize) -> Result<()> {
        if !(self.percentile > 0.0 && self.percentile < 100.0) {
            return Err(Error::invalid("percentile", "must be in (0, 100)"));
        }
        if self.lambda_prime <= lambda {
            return Err(Error::invalid(
                "lambda_prime",
                format!("must exceed lambda ({lambda}), got {}", self.lambda_prime),
            ));
        }
        if self.capacity < 1 {
            return Err(Error::invalid("capacity", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::invalid("warmup_fraction", "must be in [0, 1)"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate", "must be > 0"));
        }
        if self.minibatch < 1 {
            return Err(Error::invalid("minibatch", "must be >= 1"));
        }
        Ok(())
    }
}

/// Full predictor-assisted optimization loop.
///
/// During the warm-up (the first `warmup_fraction` of iterations) the
/// optimizer runs plainly at population λ while the classifier trains on
/// everything evaluated. Afterwards each iteration generates λ′ candidates,
/// filters them to λ through the classifier, and evaluates only those.
/// Every true fitness call counts against `budget`, which is consumed
/// exactly (one truncated, update-free batch at the end if λ ∤ budget).
pub fn assisted_optimize(
    objective: &dyn Objective,
    budget: u64,
    sigma0: f64,
    lambda: Option<usize>,
    config: &PredictorConfig,
    seed: u64,
) -> Result<RunOutcome> {
    let dim = objective.dim();
    let lambda = match lambda {
        Some(l) => l,
        None => default_lambda(dim)?,
    };
    config.validate(lambda)?;
    if budget < lambda as u64 {
        return Err(Error::BudgetTooSmall { budget, lambda });
    }

    let total_iterations = budget / lambda as u64;
    let warmup_iterations = (config.warmup_fraction * total_iterations as f64).floor() as u64;

    let mut es = LmMaEsState::init(dim, &LatentVector::zeros(dim), sigma0, Some(lambda), seed)?;
    let mut predictor_rng = rng::substream(seed, "predictor");
    let mut classifier = NeuralClassifier::new(dim, &mut predictor_rng)?;
    let mut memory = CandidateMemory::new(config.capacity)?;
    let mut monitor = AccuracyMonitor::new(config.tau_acc, config.reset_patience)?;

    let mut best = BestTracker::default();
    let mut trace = Vec::with_capacity(total_iterations as usize);
    let mut used = 0u64;

    for iteration in 0..total_iterations {
        let warming_up = iteration < warmup_iterations;
        let (mut population, scores, mean_pool_score) = if warming_up {
            (es.ask(lambda)?, None, None)
        } else {
            let pool = es.ask(config.lambda_prime)?;
            let filtered = filter_candidates(&classifier, pool, lambda, &mut predictor_rng)?;
            (filtered.candidates, Some(filtered.scores), Some(filtered.mean_pool_score))
        };

        let xs: Vec<&[f64]> = population.iter().map(|c| c.latent.as_slice()).collect();
        let fits = evaluate_batch(objective, &xs);
        used += lambda as u64;
        for (c, f) in population.iter_mut().zip(&fits) {
            c.fitness = Some(*f);
            best.observe(&c.latent, *f);
        }

        // The monitor judges predictions against the percentile of the
        // distribution the classifier was trained on, so the threshold is
        // taken before this population enters the memory.
        let threshold_before =
            if memory.is_empty() { None } else { Some(memory.percentile_threshold(config.percentile)?) };

        let evaluated: Vec<Candidate> = population
            .iter()
            .map(|c| Candidate::evaluated(c.latent.clone(), c.fitness.unwrap()))
            .collect();
        memory.insert(&evaluated, &mut predictor_rng)?;

        es.tell(population)?;

        let entries = memory.entries();
        let labels = memory.labels(config.percentile)?;
        let inputs: Vec<&[f64]> = entries.iter().map(|(z, _)| z.as_slice()).collect();
        classifier.train_epoch(
            &inputs,
            &labels,
            config.learning_rate,
            config.minibatch,
            &mut predictor_rng,
        )?;

        let mut accuracy = None;
        let mut reinit = false;
        if let (Some(scores), Some(threshold)) = (&scores, threshold_before) {
            let scored: Vec<(f64, f64)> =
                scores.iter().copied().zip(fits.iter().copied()).collect();
            let outcome = monitor.update(&scored, threshold)?;
            accuracy = Some(outcome.accuracy);
            reinit = outcome.reinit;
            if reinit {
                classifier.reinitialize(&mut predictor_rng);
            }
        }

        trace.push(TraceRow {
            iteration,
            evaluations_used: used,
            best_fitness: best.fitness(),
            mean_pool_score,
            monitor_accuracy: accuracy,
            reinit_flag: reinit,
        });
    }

    // truncated tail so the budget is consumed exactly
    let remainder = (budget - used) as usize;
    if remainder > 0 {
        let cands = es.ask(remainder)?;
        let xs: Vec<&[f64]> = cands.iter().map(|c| c.latent.as_slice()).collect();
        let fits = evaluate_batch(objective, &xs);
        for (c, f) in cands.iter().zip(&fits) {
            best.observe(&c.latent, *f);
        }
        used += remainder as u64;
        trace.push(TraceRow {
            iteration: total_iterations,
            evaluations_used: used,
            best_fitness: best.fitness(),
            mean_pool_score: None,
            monitor_accuracy: None,
            reinit_flag: false,
        });
    }

    Ok(RunOutcome { best: best.into_candidate(), evaluations: used, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn small_config() -> PredictorConfig {
        PredictorConfig { lambda_prime: 60, capacity: 300, ..PredictorConfig::default() }
    }

    #[test]
    fn budget_below_lambda_errors() {
        let objective = (8usize, |x: &[f64]| sphere(x));
        let cfg = small_config();
        assert!(matches!(
            assisted_optimize(&objective, 5, 0.3, None, &cfg, 0),
            Err(Error::BudgetTooSmall { .. })
        ));
    }

    #[test]
    fn iteration_and_warmup_arithmetic() {
        // budget 26400 at λ=22 → 1200 iterations, warm-up floor(0.05·1200)=60
        let lambda = 22u64;
        let budget = 26_400u64;
        let total = budget / lambda;
        assert_eq!(total, 1200);
        assert_eq!((0.05f64 * total as f64).floor() as u64, 60);
    }

    #[test]
    fn trace_has_expected_shape_and_budget_is_exact() {
        let objective = (8usize, |x: &[f64]| sphere(x));
        let cfg = small_config();
        // λ = 10 for d = 8; 30 iterations, warm-up = floor(0.05·30) = 1
        let out = assisted_optimize(&objective, 300, 0.3, None, &cfg, 1).unwrap();
        assert_eq!(out.evaluations, 300);
        assert_eq!(out.trace.len(), 30);
        assert!(out.trace[0].mean_pool_score.is_none(), "warm-up rows carry no pool score");
        assert!(out.trace[2].mean_pool_score.is_some());
        // post-warm-up rows after the first post-warm-up iteration carry accuracy
        assert!(out.trace[3].monitor_accuracy.is_some());
        let mut prev = f64::INFINITY;
        for row in &out.trace {
            assert!(row.best_fitness <= prev);
            prev = row.best_fitness;
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let objective = (6usize, |x: &[f64]| sphere(x));
        let cfg = small_config();
        let a = assisted_optimize(&objective, 270, 0.3, None, &cfg, 5).unwrap();
        let b = assisted_optimize(&objective, 270, 0.3, None, &cfg, 5).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn truncated_tail_consumes_leftover_budget() {
        let objective = (6usize, |x: &[f64]| sphere(x));
        let cfg = small_config();
        // λ = 9 for d = 6; 100 = 11·9 + 1
        let out = assisted_optimize(&objective, 100, 0.3, None, &cfg, 2).unwrap();
        assert_eq!(out.evaluations, 100);
        assert_eq!(out.trace.len(), 12);
    }

    #[test]
    fn config_validation_catches_bad_fields() {
        let lambda = 22;
        let mut cfg = PredictorConfig::default();
        assert!(cfg.validate(lambda).is_ok());
        cfg.lambda_prime = 22;
        assert!(cfg.validate(lambda).is_err());
        cfg = PredictorConfig { percentile: 0.0, ..PredictorConfig::default() };
        assert!(cfg.validate(lambda).is_err());
        cfg = PredictorConfig { warmup_fraction: 1.0, ..PredictorConfig::default() };
        assert!(cfg.validate(lambda).is_err());
    }
}
