//! Full covariance matrix adaptation evolution strategy (standard
//! rank-one + rank-mu updates with CSA step-size control).
//!
//! Kept as a comparison baseline; the O(d^2) memory and O(d^3)
//! eigendecomposition make it expensive in high dimension, which is exactly
//! the regime the limited-memory variant targets. The eigendecomposition is
//! refreshed lazily every `max(1, floor(d/10))` iterations.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::optim::{evaluate_batch, lmmaes::default_lambda, BestTracker, Objective, RunOutcome, TraceRow};
use crate::rng;
use crate::types::{Candidate, LatentVector};

const EIGENVALUE_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone)]
pub struct CmaEsState {
    dim: usize,
    lambda: usize,
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    p_sigma: DVector<f64>,
    p_c: DVector<f64>,
    /// Cached factor B·D of C = B·D^2·B^T used for sampling.
    sample_transform: DMatrix<f64>,
    /// Cached C^{-1/2} used by the p_sigma update.
    inv_sqrt_cov: DMatrix<f64>,
    eigen_iteration: u64,
    eigen_period: u64,
    iteration: u64,
    rng: ChaCha8Rng,
}

impl CmaEsState {
    pub fn init(dim: usize, x0: &[f64], sigma0: f64, lambda: Option<usize>, seed: u64) -> Result<Self> {
        if dim < 1 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        if !(sigma0 > 0.0) || !sigma0.is_finite() {
            return Err(Error::invalid("sigma0", format!("must be finite and > 0, got {sigma0}")));
        }
        if x0.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: x0.len() });
        }
        if dim > 1000 {
            log::warn!(
                "cmaes: dimension {dim} exceeds 1000; the full covariance update is quadratic \
                 in time and space, consider lmmaes"
            );
        }
        let lambda = match lambda {
            Some(l) if l >= 2 => l,
            Some(l) => return Err(Error::invalid("lambda", format!("must be >= 2, got {l}"))),
            None => default_lambda(dim)?,
        };
        let n = dim as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.into_iter().map(|w| w / sum).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu =
            (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff)).min(1.0 - c_1);
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

        Ok(CmaEsState {
            dim,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            mean: DVector::from_column_slice(x0),
            sigma: sigma0,
            cov: DMatrix::identity(dim, dim),
            p_sigma: DVector::zeros(dim),
            p_c: DVector::zeros(dim),
            sample_transform: DMatrix::identity(dim, dim),
            inv_sqrt_cov: DMatrix::identity(dim, dim),
            eigen_iteration: 0,
            eigen_period: (dim / 10).max(1) as u64,
            iteration: 0,
            rng: rng::substream(seed, "cmaes"),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Refreshes the cached eigendecomposition-derived factors.
    fn refresh_factors(&mut self) -> Result<()> {
        let eigen = nalgebra::SymmetricEigen::new(self.cov.clone());
        if eigen.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::CovarianceRepair("non-finite eigenvalue".into()));
        }
        let sqrt_vals = eigen.eigenvalues.map(|v| v.max(EIGENVALUE_FLOOR).sqrt());
        let b = &eigen.eigenvectors;
        self.sample_transform = b * DMatrix::from_diagonal(&sqrt_vals);
        let inv_sqrt = sqrt_vals.map(|v| 1.0 / v);
        self.inv_sqrt_cov = b * DMatrix::from_diagonal(&inv_sqrt) * b.transpose();
        self.eigen_iteration = self.iteration;
        Ok(())
    }

    /// Samples λ candidates: `x_k = mean + σ·B·D·z_k`.
    pub fn sample_population(&mut self) -> Result<Vec<Candidate>> {
        if self.iteration == 0 || self.iteration - self.eigen_iteration >= self.eigen_period {
            self.refresh_factors()?;
        }
        let mut out = Vec::with_capacity(self.lambda);
        for _ in 0..self.lambda {
            let z = DVector::from_iterator(
                self.dim,
                (0..self.dim).map(|_| StandardNormal.sample(&mut self.rng)),
            );
            let x = &self.mean + self.sigma * &self.sample_transform * z;
            out.push(Candidate::new(LatentVector::new(x.as_slice().to_vec())));
        }
        Ok(out)
    }

    /// Standard CMA-ES state update from an evaluated population.
    pub fn update(&mut self, mut evaluated: Vec<Candidate>) -> Result<()> {
        if evaluated.len() != self.lambda {
            return Err(Error::PopulationSize { expected: self.lambda, got: evaluated.len() });
        }
        for c in &evaluated {
            match c.fitness {
                Some(f) if f.is_finite() => {}
                Some(_) => return Err(Error::NonFiniteFitness),
                None => return Err(Error::UnevaluatedCandidate),
            }
        }
        evaluated.sort_by(|a, b| {
            a.fitness.unwrap().partial_cmp(&b.fitness.unwrap()).expect("finite fitness")
        });

        let old_mean = self.mean.clone();
        let mut new_mean = DVector::zeros(self.dim);
        for (w, cand) in self.weights.iter().zip(evaluated.iter()) {
            new_mean += *w * DVector::from_column_slice(cand.latent.as_slice());
        }
        let mean_step = (&new_mean - &old_mean) / self.sigma;

        self.p_sigma = (1.0 - self.c_sigma) * &self.p_sigma
            + (self.c_sigma * (2.0 - self.c_sigma) * self.mu_eff).sqrt()
                * &self.inv_sqrt_cov
                * &mean_step;

        let gen_factor = 1.0 - (1.0 - self.c_sigma).powi(2 * (self.iteration as i32 + 1));
        let p_sigma_norm = self.p_sigma.norm();
        let h_sigma = if p_sigma_norm
            < (1.4 + 2.0 / (self.dim as f64 + 1.0)) * self.chi_n * gen_factor.sqrt()
        {
            1.0
        } else {
            0.0
        };

        self.p_c = (1.0 - self.c_c) * &self.p_c
            + h_sigma * (self.c_c * (2.0 - self.c_c) * self.mu_eff).sqrt() * &mean_step;

        let mut rank_mu = DMatrix::zeros(self.dim, self.dim);
        for (w, cand) in self.weights.iter().zip(evaluated.iter()) {
            let y = (DVector::from_column_slice(cand.latent.as_slice()) - &old_mean) / self.sigma;
            rank_mu += *w * &y * y.transpose();
        }

        let delta_h = (1.0 - h_sigma) * self.c_c * (2.0 - self.c_c);
        let base = 1.0 - self.c_1 - self.c_mu + self.c_1 * delta_h;
        self.cov = base * &self.cov
            + self.c_1 * &self.p_c * self.p_c.transpose()
            + self.c_mu * rank_mu;
        // keep C exactly symmetric against floating-point drift
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;

        let arg = ((self.c_sigma / self.d_sigma) * (p_sigma_norm / self.chi_n - 1.0))
            .clamp(-10.0, 10.0);
        self.sigma *= arg.exp();
        self.mean = new_mean;
        self.iteration += 1;
        Ok(())
    }

    /// One generation: sample, evaluate, update. Returns the evaluated
    /// population for bookkeeping.
    pub fn step(&mut self, objective: &dyn Objective) -> Result<Vec<Candidate>> {
        let mut cands = self.sample_population()?;
        let xs: Vec<&[f64]> = cands.iter().map(|c| c.latent.as_slice()).collect();
        let fits = evaluate_batch(objective, &xs);
        for (c, f) in cands.iter_mut().zip(&fits) {
            c.fitness = Some(*f);
        }
        self.update(cands.clone())?;
        Ok(cands)
    }
}

/// Full run driver with exact budget accounting (whole generations plus one
/// truncated, update-free batch for any remainder).
pub fn minimize(
    objective: &dyn Objective,
    budget: u64,
    sigma0: f64,
    lambda: Option<usize>,
    seed: u64,
) -> Result<RunOutcome> {
    let dim = objective.dim();
    let mut state = CmaEsState::init(dim, &vec![0.0; dim], sigma0, lambda, seed)?;
    let lam = state.lambda();
    if budget < lam as u64 {
        return Err(Error::BudgetTooSmall { budget, lambda: lam });
    }
    let mut best = BestTracker::default();
    let mut trace = Vec::new();
    let mut used = 0u64;
    while used + lam as u64 <= budget {
        let evaluated = state.step(objective)?;
        for c in &evaluated {
            best.observe(&c.latent, c.fitness.unwrap());
        }
        used += lam as u64;
        trace.push(TraceRow {
            iteration: trace.len() as u64,
            evaluations_used: used,
            best_fitness: best.fitness(),
            mean_pool_score: None,
            monitor_accuracy: None,
            reinit_flag: false,
        });
    }
    let remainder = (budget - used) as usize;
    if remainder > 0 {
        let cands = state.sample_population()?;
        let xs: Vec<&[f64]> = cands.iter().take(remainder).map(|c| c.latent.as_slice()).collect();
        let fits = evaluate_batch(objective, &xs);
        for (c, f) in cands.iter().zip(&fits) {
            best.observe(&c.latent, *f);
        }
        used += remainder as u64;
        trace.push(TraceRow {
            iteration: trace.len() as u64,
            evaluations_used: used,
            best_fitness: best.fitness(),
            mean_pool_score: None,
            monitor_accuracy: None,
            reinit_flag: false,
        });
    }
    Ok(RunOutcome { best: best.into_candidate(), evaluations: used, trace })
}
