//! Classic differential evolution, DE/rand/1/bin.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::optim::{evaluate_batch, BestTracker, Objective, RunOutcome, TraceRow};
use crate::rng;
use crate::types::{Candidate, LatentVector};

#[derive(Debug, Clone)]
pub struct DeState {
    population: Vec<Candidate>,
    f: f64,
    cr: f64,
    rng: ChaCha8Rng,
    generation: u64,
}

impl DeState {
    /// Initializes NP members from the standard-normal prior and evaluates
    /// them (consuming NP evaluations).
    pub fn init(
        objective: &dyn Objective,
        np: usize,
        f: f64,
        cr: f64,
        seed: u64,
    ) -> Result<Self> {
        if np < 4 {
            return Err(Error::invalid("np", format!("DE needs NP >= 4, got {np}")));
        }
        if !(0.0..=1.0).contains(&cr) {
            return Err(Error::invalid("cr", format!("must be in [0, 1], got {cr}")));
        }
        if !f.is_finite() {
            return Err(Error::invalid("f", "must be finite"));
        }
        let dim = objective.dim();
        let mut rng = rng::substream(seed, "de");
        let mut population = Vec::with_capacity(np);
        for _ in 0..np {
            let x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            population.push(Candidate::new(LatentVector::new(x)));
        }
        let xs: Vec<&[f64]> = population.iter().map(|c| c.latent.as_slice()).collect();
        let fits = evaluate_batch(objective, &xs);
        for (c, fit) in population.iter_mut().zip(fits) {
            c.fitness = Some(fit);
        }
        Ok(DeState { population, f, cr, rng, generation: 0 })
    }

    pub fn population(&self) -> &[Candidate] {
        &self.population
    }

    pub fn best(&self) -> &Candidate {
        self.population
            .iter()
            .min_by(|a, b| a.fitness.unwrap().partial_cmp(&b.fitness.unwrap()).unwrap())
            .expect("population is nonempty")
    }

    /// Builds the generation's trial vectors (mutation + binomial
    /// crossover). Donors come from the population as it stood at the start
    /// of the generation.
    fn make_trials(&mut self) -> Vec<Vec<f64>> {
        let np = self.population.len();
        let dim = self.population[0].latent.len();
        let mut trials = Vec::with_capacity(np);
        for i in 0..np {
            let (r1, r2, r3) = distinct_indices(&mut self.rng, np, i);
            let x1 = self.population[r1].latent.as_slice();
            let x2 = self.population[r2].latent.as_slice();
            let x3 = self.population[r3].latent.as_slice();
            let xi = self.population[i].latent.as_slice();
            let j_rand = self.rng.random_range(0..dim);
            let mut trial = Vec::with_capacity(dim);
            for j in 0..dim {
                let crossed = j == j_rand || self.rng.random::<f64>() < self.cr;
                if crossed {
                    trial.push(x1[j] + self.f * (x2[j] - x3[j]));
                } else {
                    trial.push(xi[j]);
                }
            }
            trials.push(trial);
        }
        trials
    }

    /// One generation: a trial per member, greedy replacement when the
    /// trial's fitness is <= the incumbent's. Consumes NP evaluations.
    pub fn step(&mut self, objective: &dyn Objective) -> Result<()> {
        let trials = self.make_trials();
        let xs: Vec<&[f64]> = trials.iter().map(|t| t.as_slice()).collect();
        let fits = evaluate_batch(objective, &xs);
        for ((member, trial), fit) in self.population.iter_mut().zip(trials).zip(fits) {
            if fit <= member.fitness.unwrap() {
                *member = Candidate::evaluated(LatentVector::new(trial), fit);
            }
        }
        self.generation += 1;
        Ok(())
    }

    /// Partial generation for exact budget accounting: trials for the first
    /// `count` members only.
    fn step_partial(&mut self, objective: &dyn Objective, count: usize) -> Result<()> {
        let trials = self.make_trials();
        let xs: Vec<&[f64]> = trials.iter().take(count).map(|t| t.as_slice()).collect();
        let fits = evaluate_batch(objective, &xs);
        for ((member, trial), fit) in self.population.iter_mut().zip(trials).zip(fits) {
            if fit <= member.fitness.unwrap() {
                *member = Candidate::evaluated(LatentVector::new(trial), fit);
            }
        }
        Ok(())
    }
}

fn distinct_indices(rng: &mut ChaCha8Rng, np: usize, exclude: usize) -> (usize, usize, usize) {
    let mut draw = |taken: &[usize]| loop {
        let r = rng.random_range(0..np);
        if r != exclude && !taken.contains(&r) {
            return r;
        }
    };
    let r1 = draw(&[]);
    let r2 = draw(&[r1]);
    let r3 = draw(&[r1, r2]);
    (r1, r2, r3)
}

/// Runs DE for exactly `budget` evaluations (NP for the initial population,
/// NP per generation, and one partial generation for any remainder).
pub fn minimize(
    objective: &dyn Objective,
    budget: u64,
    np: usize,
    f: f64,
    cr: f64,
    seed: u64,
) -> Result<RunOutcome> {
    if budget < np as u64 {
        return Err(Error::BudgetTooSmall { budget, lambda: np });
    }
    let mut state = DeState::init(objective, np, f, cr, seed)?;
    let mut used = np as u64;
    let mut best = BestTracker::default();
    let mut trace = Vec::new();
    let record = |state: &DeState, used: u64, best: &mut BestTracker, trace: &mut Vec<TraceRow>| {
        let b = state.best();
        best.observe(&b.latent, b.fitness.unwrap());
        trace.push(TraceRow {
            iteration: trace.len() as u64,
            evaluations_used: used,
            best_fitness: best.fitness(),
            mean_pool_score: None,
            monitor_accuracy: None,
            reinit_flag: false,
        });
    };
    record(&state, used, &mut best, &mut trace);
    while used + np as u64 <= budget {
        state.step(objective)?;
        used += np as u64;
        record(&state, used, &mut best, &mut trace);
    }
    let remainder = (budget - used) as usize;
    if remainder > 0 {
        state.step_partial(objective, remainder)?;
        used += remainder as u64;
        record(&state, used, &mut best, &mut trace);
    }
    Ok(RunOutcome { best: best.into_candidate(), evaluations: used, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn np_below_four_errors() {
        let objective = (3usize, |x: &[f64]| sphere(x));
        assert!(DeState::init(&objective, 3, 0.5, 0.9, 0).is_err());
    }

    #[test]
    fn degenerate_parameters_leave_identical_population_unchanged() {
        // With F = 0 and CR = 0, and all members identical, each trial copies
        // the member exactly (the forced coordinate comes from an identical
        // donor), so fitnesses cannot change.
        let objective = (4usize, |x: &[f64]| sphere(x));
        let mut state = DeState::init(&objective, 6, 0.0, 0.0, 1).unwrap();
        let template = state.population[0].clone();
        for member in &mut state.population {
            *member = template.clone();
        }
        let before: Vec<f64> = state.population.iter().map(|c| c.fitness.unwrap()).collect();
        let latents_before: Vec<LatentVector> =
            state.population.iter().map(|c| c.latent.clone()).collect();
        state.step(&objective).unwrap();
        let after: Vec<f64> = state.population.iter().map(|c| c.fitness.unwrap()).collect();
        let latents_after: Vec<LatentVector> =
            state.population.iter().map(|c| c.latent.clone()).collect();
        assert_eq!(before, after);
        assert_eq!(latents_before, latents_after);
    }

    #[test]
    fn population_size_preserved_every_step() {
        let objective = (5usize, |x: &[f64]| sphere(x));
        let mut state = DeState::init(&objective, 8, 0.5, 0.9, 2).unwrap();
        for _ in 0..20 {
            state.step(&objective).unwrap();
            assert_eq!(state.population().len(), 8);
            assert!(state.population().iter().all(|c| c.fitness.is_some()));
        }
    }

    #[test]
    fn deterministic_and_exact_budget() {
        let objective = (4usize, |x: &[f64]| sphere(x));
        let a = minimize(&objective, 203, 8, 0.5, 0.9, 7).unwrap();
        let b = minimize(&objective, 203, 8, 0.5, 0.9, 7).unwrap();
        assert_eq!(a.evaluations, 203);
        assert_eq!(a.best, b.best);
        assert_eq!(a.trace, b.trace);
        // best-so-far monotone
        let mut prev = f64::INFINITY;
        for row in &a.trace {
            assert!(row.best_fitness <= prev);
            prev = row.best_fitness;
        }
    }
}
