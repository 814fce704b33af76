//! Limited-memory matrix adaptation evolution strategy.
//!
//! Instead of a full covariance matrix, the sampling distribution is shaped
//! by `m` direction vectors applied sequentially to a standard-normal draw,
//! which keeps the per-sample cost at O(m·d) and makes the method practical
//! for high-dimensional search.
//!
//! Recurrences (all 1-based in `i`, clamped to [0, 1] to guard tiny `d`):
//!   - sampling: `d_k ← (1 − c_{d,i})·d_k + c_{d,i}·M_i·(M_iᵀ·d_k)` for
//!     `i = 1..min(t, m)`, with `c_{d,i} = 1/(1.5^i · d)`
//!   - path: `p_σ ← (1 − c_σ)·p_σ + sqrt(μ_w·c_σ·(2 − c_σ))·Σ w_i z_{i:λ}`
//!     with `c_σ = 2λ/d`
//!   - directions: `M_i ← (1 − c_{c,i})·M_i + sqrt(μ_w·c_{c,i}·(2 − c_{c,i}))·Σ w_i z_{i:λ}`
//!     with `c_{c,i} = λ/(4^i · d)`
//!   - step size: `σ ← σ·exp((c_σ/2)·(‖p_σ‖²/d − 1))`

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{evaluate_batch, BestTracker, Objective, RunOutcome, TraceRow};
use crate::rng;
use crate::types::LatentVector;

/// Default population size rule: `4 + floor(3 ln d)`.
pub fn default_lambda(dim: usize) -> Result<usize> {
    if dim < 1 {
        return Err(Error::invalid("dim", "must be >= 1"));
    }
    Ok(4 + (3.0 * (dim as f64).ln()).floor() as usize)
}

/// Selection weights `w_i ∝ ln(μ + 1/2) − ln i`, normalized to sum 1.
fn selection_weights(mu: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// A candidate sampled by [`LmMaEsState::ask`]: the latent point together
/// with the raw standard-normal draw it was transformed from, which the
/// `tell` step needs for the path and direction updates.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCandidate {
    pub latent: LatentVector,
    pub z: Vec<f64>,
    pub fitness: Option<f64>,
}

/// Mutable optimizer state; owned by a single optimization loop.
#[derive(Debug, Clone)]
pub struct LmMaEsState {
    dim: usize,
    mean: Vec<f64>,
    sigma: f64,
    /// Direction vectors M_1..M_m, all zero at init.
    dirs: Vec<Vec<f64>>,
    path_sigma: Vec<f64>,
    lambda: usize,
    mu: usize,
    weights: Vec<f64>,
    mu_w: f64,
    c_sigma: f64,
    c_d: Vec<f64>,
    c_c: Vec<f64>,
    iteration: u64,
    rng: ChaCha8Rng,
}

impl LmMaEsState {
    /// Creates a fresh state. `lambda` defaults to [`default_lambda`];
    /// the number of direction vectors always follows the default rule.
    pub fn init(
        dim: usize,
        x0: &LatentVector,
        sigma0: f64,
        lambda: Option<usize>,
        seed: u64,
    ) -> Result<Self> {
        if dim < 1 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        if !(sigma0 > 0.0) || !sigma0.is_finite() {
            return Err(Error::invalid("sigma0", format!("must be finite and > 0, got {sigma0}")));
        }
        if x0.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: x0.len() });
        }
        let m = default_lambda(dim)?;
        let lambda = match lambda {
            Some(l) if l >= 2 => l,
            Some(l) => return Err(Error::invalid("lambda", format!("must be >= 2, got {l}"))),
            None => m,
        };
        let mu = lambda / 2;
        let weights = selection_weights(mu);
        let mu_w = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let d = dim as f64;
        let c_sigma = (2.0 * lambda as f64 / d).clamp(0.0, 1.0);
        let c_d: Vec<f64> =
            (1..=m).map(|i| (1.0 / (1.5f64.powi(i as i32) * d)).clamp(0.0, 1.0)).collect();
        let c_c: Vec<f64> =
            (1..=m).map(|i| (lambda as f64 / (4.0f64.powi(i as i32) * d)).clamp(0.0, 1.0)).collect();
        Ok(LmMaEsState {
            dim,
            mean: x0.as_slice().to_vec(),
            sigma: sigma0,
            dirs: vec![vec![0.0; dim]; m],
            path_sigma: vec![0.0; dim],
            lambda,
            mu,
            weights,
            mu_w,
            c_sigma,
            c_d,
            c_c,
            iteration: 0,
            rng: rng::substream(seed, "lmmaes"),
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
        &self.mean
    }

    pub fn path_sigma(&self) -> &[f64] {
        &self.path_sigma
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.dirs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Samples `count` candidates from the current distribution.
    ///
    /// Draws are candidate-major, coordinate-minor, so the stream is
    /// reproducible for a fixed seed regardless of later evaluation order.
    pub fn ask(&mut self, count: usize) -> Result<Vec<SampledCandidate>> {
        if count < 1 {
            return Err(Error::invalid("count", "must be >= 1"));
        }
        // In the first iterations only the already-adapted directions take
        // part; with t = 0 the transform is skipped entirely and candidates
        // are exactly mean + sigma * z.
        let active = (self.iteration as usize).min(self.dirs.len());
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let z: Vec<f64> =
                (0..self.dim).map(|_| StandardNormal.sample(&mut self.rng)).collect();
            let mut d = z.clone();
            for j in 0..active {
                let mj = &self.dirs[j];
                let proj: f64 = mj.iter().zip(&d).map(|(a, b)| a * b).sum();
                let cd = self.c_d[j];
                for (dk, mjk) in d.iter_mut().zip(mj) {
                    *dk = (1.0 - cd) * *dk + cd * mjk * proj;
                }
            }
            let x: Vec<f64> =
                self.mean.iter().zip(&d).map(|(mk, dk)| mk + self.sigma * dk).collect();
            out.push(SampledCandidate { latent: LatentVector::new(x), z, fitness: None });
        }
        Ok(out)
    }

    /// Consumes one evaluated population and updates mean, paths,
    /// directions, and step size.
    ///
    /// Candidates are ranked by fitness ascending with a stable sort, so
    /// ties keep submission order.
    pub fn tell(&mut self, mut evaluated: Vec<SampledCandidate>) -> Result<()> {
        if evaluated.len() != self.lambda {
            return Err(Error::PopulationSize { expected: self.lambda, got: evaluated.len() });
        }
        for c in &evaluated {
            match c.fitness {
                Some(f) if f.is_finite() => {}
                Some(_) => return Err(Error::NonFiniteFitness),
                None => return Err(Error::UnevaluatedCandidate),
            }
            if c.latent.len() != self.dim || c.z.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: c.latent.len() });
            }
        }
        evaluated.sort_by(|a, b| {
            a.fitness.unwrap().partial_cmp(&b.fitness.unwrap()).expect("finite fitness")
        });

        let mut new_mean = vec![0.0; self.dim];
        let mut weighted_z = vec![0.0; self.dim];
        for (w, cand) in self.weights.iter().zip(evaluated.iter()) {
            for k in 0..self.dim {
                new_mean[k] += w * cand.latent.as_slice()[k];
                weighted_z[k] += w * cand.z[k];
            }
        }
        self.mean = new_mean;

        let cs = self.c_sigma;
        let path_gain = (self.mu_w * cs * (2.0 - cs)).sqrt();
        for k in 0..self.dim {
            self.path_sigma[k] = (1.0 - cs) * self.path_sigma[k] + path_gain * weighted_z[k];
        }

        for (j, dir) in self.dirs.iter_mut().enumerate() {
            let cc = self.c_c[j];
            let gain = (self.mu_w * cc * (2.0 - cc)).sqrt();
            for k in 0..self.dim {
                dir[k] = (1.0 - cc) * dir[k] + gain * weighted_z[k];
            }
        }

        let psq: f64 = self.path_sigma.iter().map(|v| v * v).sum();
        // The exponent is clamped so sigma stays positive and finite even
        // under adversarial fitness sequences.
        let arg = ((cs / 2.0) * (psq / self.dim as f64 - 1.0)).clamp(-10.0, 10.0);
        self.sigma *= arg.exp();
        self.iteration += 1;
        Ok(())
    }

    /// Serializable snapshot of the full state (see [`LmMaEsSnapshot`]).
    pub fn snapshot(&self) -> LmMaEsSnapshot {
        LmMaEsSnapshot {
            version: SNAPSHOT_VERSION,
            dim: self.dim,
            mean: self.mean.clone(),
            sigma: self.sigma,
            dirs: self.dirs.clone(),
            path_sigma: self.path_sigma.clone(),
            lambda: self.lambda,
            iteration: self.iteration,
            rng_seed: self.rng.get_seed().to_vec(),
            rng_word_pos: self.rng.get_word_pos(),
        }
    }

    /// Restores a state from a snapshot; derived coefficients are
    /// recomputed from `(dim, lambda)`.
    pub fn from_snapshot(snap: &LmMaEsSnapshot) -> Result<Self> {
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported snapshot version {} (expected {SNAPSHOT_VERSION})",
                snap.version
            )));
        }
        let mut state = LmMaEsState::init(
            snap.dim,
            &LatentVector::new(snap.mean.clone()),
            snap.sigma,
            Some(snap.lambda),
            0,
        )?;
        if snap.dirs.len() != state.dirs.len()
            || snap.dirs.iter().any(|d| d.len() != snap.dim)
            || snap.path_sigma.len() != snap.dim
        {
            return Err(Error::Snapshot("direction/path dimensions inconsistent".into()));
        }
        state.dirs = snap.dirs.clone();
        state.path_sigma = snap.path_sigma.clone();
        state.iteration = snap.iteration;
        let seed: [u8; 32] = snap.rng_seed.as_slice().try_into().map_err(|_| {
            Error::Snapshot(format!("rng seed must be 32 bytes, got {}", snap.rng_seed.len()))
        })?;
        let mut rng = <ChaCha8Rng as rand_chacha::rand_core::SeedableRng>::from_seed(seed);
        rng.set_word_pos(snap.rng_word_pos);
        state.rng = rng;
        Ok(state)
    }
}

pub const SNAPSHOT_VERSION: u32 = 1;

/// Checkpoint format, versioned. The RNG is captured as its 32-byte seed
/// plus the stream position, which is stable across platforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmMaEsSnapshot {
    pub version: u32,
    pub dim: usize,
    pub mean: Vec<f64>,
    pub sigma: f64,
    pub dirs: Vec<Vec<f64>>,
    pub path_sigma: Vec<f64>,
    pub lambda: usize,
    pub iteration: u64,
    pub rng_seed: Vec<u8>,
    pub rng_word_pos: u128,
}

/// Full run driver: repeated ask/evaluate/tell until the budget is spent.
///
/// The budget is consumed exactly: whole populations while they fit, then
/// one truncated batch (evaluated for best-so-far bookkeeping only).
pub fn minimize(
    objective: &dyn Objective,
    budget: u64,
    sigma0: f64,
    lambda: Option<usize>,
    seed: u64,
) -> Result<RunOutcome> {
    let dim = objective.dim();
    let mut state = LmMaEsState::init(dim, &LatentVector::zeros(dim), sigma0, lambda, seed)?;
    minimize_from(&mut state, objective, budget, 0)
}

/// Driver body, resumable from an existing state. `evals_already_used` only
/// offsets the trace's evaluation counter.
pub fn minimize_from(
    state: &mut LmMaEsState,
    objective: &dyn Objective,
    budget: u64,
    evals_already_used: u64,
) -> Result<RunOutcome> {
    let lambda = state.lambda();
    if budget < lambda as u64 {
        return Err(Error::BudgetTooSmall { budget, lambda });
    }
    let mut best = BestTracker::default();
    let mut trace = Vec::new();
    let mut used = 0u64;
    while used + lambda as u64 <= budget {
        let mut cands = state.ask(lambda)?;
        let xs: Vec<&[f64]> = cands.iter().map(|c| c.latent.as_slice()).collect();
        let fits = evaluate_batch(objective, &xs);
        for (c, f) in cands.iter_mut().zip(&fits) {
            c.fitness = Some(*f);
            best.observe(&c.latent, *f);
        }
        state.tell(cands)?;
        used += lambda as u64;
        trace.push(TraceRow {
            iteration: trace.len() as u64,
            evaluations_used: evals_already_used + used,
            best_fitness: best.fitness(),
            mean_pool_score: None,
            monitor_accuracy: None,
            reinit_flag: false,
        });
    }
    let remainder = (budget - used) as usize;
    if remainder > 0 {
        let cands = state.ask(remainder)?;
        let xs: Vec<&[f64]> = cands.iter().map(|c| c.latent.as_slice()).collect();
        let fits = evaluate_batch(objective, &xs);
        for (c, f) in cands.iter().zip(&fits) {
            best.observe(&c.latent, *f);
        }
        used += remainder as u64;
        trace.push(TraceRow {
            iteration: trace.len() as u64,
            evaluations_used: evals_already_used + used,
            best_fitness: best.fitness(),
            mean_pool_score: None,
            monitor_accuracy: None,
            reinit_flag: false,
        });
    }
    Ok(RunOutcome { best: best.into_candidate(), evaluations: used, trace })
}
