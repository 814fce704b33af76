//! Optimizer-facing plumbing shared by the evolution strategies and
//! baselines: the objective trait, exact budget accounting, per-iteration
//! traces, and the dispatch over optimizer kinds.

pub mod cmaes;
pub mod de;
pub mod lmmaes;
pub mod random_search;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::{assisted_optimize, PredictorConfig};
use crate::types::Candidate;

/// A pure minimization objective over `R^dim`.
///
/// Implementations must be thread-safe: population evaluation may run in
/// parallel, with results returned in submission order.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (self.1)(x)
    }
}

/// Evaluates a batch in parallel, preserving order.
pub fn evaluate_batch(objective: &dyn Objective, xs: &[&[f64]]) -> Vec<f64> {
    use rayon::prelude::*;
    xs.par_iter().map(|x| objective.eval(x)).collect()
}

/// One row of the per-iteration trace.
///
/// `mean_pool_score` and `monitor_accuracy` are populated only by the
/// predictor-assisted optimizer after its warm-up; other optimizers leave
/// them empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: u64,
    pub evaluations_used: u64,
    pub best_fitness: f64,
    pub mean_pool_score: Option<f64>,
    pub monitor_accuracy: Option<f64>,
    pub reinit_flag: bool,
}

pub const TRACE_CSV_HEADER: &str =
    "iteration,evaluations_used,best_fitness,mean_pool_score,monitor_accuracy,reinit_flag";

impl TraceRow {
    pub fn to_csv_line(&self) -> String {
        let opt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.iteration,
            self.evaluations_used,
            self.best_fitness,
            opt(&self.mean_pool_score),
            opt(&self.monitor_accuracy),
            u8::from(self.reinit_flag),
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse(format!("trace row needs 6 fields, got {}", fields.len())));
        }
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                Ok(Some(s.parse().map_err(|e| Error::Parse(format!("bad float: {e}")))?))
            }
        };
        Ok(TraceRow {
            iteration: fields[0].parse().map_err(|e| Error::Parse(format!("bad iteration: {e}")))?,
            evaluations_used: fields[1]
                .parse()
                .map_err(|e| Error::Parse(format!("bad evaluations: {e}")))?,
            best_fitness: fields[2].parse().map_err(|e| Error::Parse(format!("bad fitness: {e}")))?,
            mean_pool_score: opt(fields[3])?,
            monitor_accuracy: opt(fields[4])?,
            reinit_flag: fields[5] == "1" || fields[5] == "true",
        })
    }
}

/// Writes a trace as CSV (header plus one line per iteration).
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut out: W) -> Result<()> {
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv_line())?;
    }
    Ok(())
}

/// Parses a CSV produced by [`write_trace_csv`].
pub fn read_trace_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRACE_CSV_HEADER => {}
        other => return Err(Error::Parse(format!("bad trace header: {other:?}"))),
    }
    lines.filter(|l| !l.is_empty()).map(TraceRow::parse_csv_line).collect()
}

/// Result of one full optimization run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub best: Candidate,
    pub evaluations: u64,
    pub trace: Vec<TraceRow>,
}

impl RunOutcome {
    pub fn best_fitness(&self) -> f64 {
        self.best.fitness.expect("run outcome always carries an evaluated best")
    }
}

/// Tracks the best candidate seen so far (ties keep the earlier one).
#[derive(Debug, Clone, Default)]
pub(crate) struct BestTracker {
    best: Option<Candidate>,
}

impl BestTracker {
    pub fn observe(&mut self, latent: &crate::types::LatentVector, fitness: f64) {
        let better = match &self.best {
            Some(b) => fitness < b.fitness.unwrap(),
            None => true,
        };
        if better {
            self.best = Some(Candidate::evaluated(latent.clone(), fitness));
        }
    }

    pub fn fitness(&self) -> f64 {
        self.best.as_ref().and_then(|b| b.fitness).unwrap_or(f64::INFINITY)
    }

    pub fn into_candidate(self) -> Candidate {
        self.best.expect("at least one candidate was observed")
    }
}

/// Optimizer selector used by configs and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "random")]
    RandomSearch,
    #[serde(rename = "de")]
    De,
    #[serde(rename = "cmaes")]
    CmaEs,
    #[serde(rename = "lmmaes")]
    LmMaEs,
    #[serde(rename = "lmmaes+predictor")]
    LmMaEsPredictor,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            OptimizerKind::RandomSearch => "random",
            OptimizerKind::De => "de",
            OptimizerKind::CmaEs => "cmaes",
            OptimizerKind::LmMaEs => "lmmaes",
            OptimizerKind::LmMaEsPredictor => "lmmaes+predictor",
        };
        write!(f, "{name}")
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(OptimizerKind::RandomSearch),
            "de" => Ok(OptimizerKind::De),
            "cmaes" => Ok(OptimizerKind::CmaEs),
            "lmmaes" => Ok(OptimizerKind::LmMaEs),
            "lmmaes+predictor" => Ok(OptimizerKind::LmMaEsPredictor),
            other => Err(Error::invalid(
                "optimizer",
                format!("unknown `{other}` (expected random|de|cmaes|lmmaes|lmmaes+predictor)"),
            )),
        }
    }
}

/// Tunables shared by the dispatch; fields not used by a given optimizer
/// are ignored by it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerParams {
    /// Initial step size for the ES family.
    pub sigma0: f64,
    /// Population size override; `None` uses `4 + floor(3 ln d)`.
    pub lambda: Option<usize>,
    /// DE population size.
    pub de_np: usize,
    /// DE differential weight.
    pub de_f: f64,
    /// DE crossover rate.
    pub de_cr: f64,
    /// Success-predictor settings (lmmaes+predictor only).
    pub predictor: PredictorConfig,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        OptimizerParams {
            sigma0: 0.3,
            lambda: None,
            de_np: 40,
            de_f: 0.5,
            de_cr: 0.9,
            predictor: PredictorConfig::default(),
        }
    }
}

/// Runs `kind` against `objective` for exactly `budget` evaluations.
pub fn minimize(
    kind: OptimizerKind,
    objective: &dyn Objective,
    budget: u64,
    params: &OptimizerParams,
    seed: u64,
) -> Result<RunOutcome> {
    match kind {
        OptimizerKind::RandomSearch => random_search::minimize(objective, budget, seed),
        OptimizerKind::De => {
            de::minimize(objective, budget, params.de_np, params.de_f, params.de_cr, seed)
        }
        OptimizerKind::CmaEs => {
            cmaes::minimize(objective, budget, params.sigma0, params.lambda, seed)
        }
        OptimizerKind::LmMaEs => {
            lmmaes::minimize(objective, budget, params.sigma0, params.lambda, seed)
        }
        OptimizerKind::LmMaEsPredictor => {
            assisted_optimize(objective, budget, params.sigma0, params.lambda, &params.predictor, seed)
        }
    }
}
