//! Experiment orchestration: single runs, multi-seed comparisons, and
//! coverage experiments, with all outputs written as deterministic files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use coversearch::coverage::{
    cluster_partition_coverage, greedy_coverage, kmeans_coverage_bound, CoverageReport,
    MasterOptimizer,
};
use coversearch::error::{Error, Result};
use coversearch::matching::{self, LatentEmbedder};
use coversearch::optim::lmmaes::LmMaEsState;
use coversearch::optim::{
    self, evaluate_batch, write_trace_csv, OptimizerKind, RunOutcome, TraceRow,
};
use coversearch::problems::{CoverageObjective, SyntheticBenchmark};
use coversearch::types::LatentVector;

use crate::config::{ExperimentConfig, OptimizerSpec};

/// Outcome of one seeded run. Wall time is kept in memory and logged, but
/// never serialized, so record files are byte-deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub optimizer: String,
    pub seed: u64,
    pub budget: u64,
    pub evaluations: u64,
    pub completed: bool,
    pub best_fitness: f64,
    pub train_msc: f64,
    pub test_msc: f64,
    pub best_latent: LatentVector,
    #[serde(skip)]
    pub wall_time_secs: f64,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

/// A problem instance shared by every run of an experiment.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub bench: SyntheticBenchmark,
}

pub fn file_tag(kind: OptimizerKind) -> String {
    kind.to_string().replace('+', "-")
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.problem.resolve()?;
        let bench = SyntheticBenchmark::build(&spec)?;
        Ok(Experiment { config, bench })
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.config.out_dir)?;
        Ok(&self.config.out_dir)
    }

    /// Optimizes on the train split, scores the best candidate on both
    /// splits, and writes `<opt>_seed<seed>_trace.csv` and `..._record.json`.
    pub fn run_single(&self, spec: &OptimizerSpec, seed: u64) -> Result<RunRecord> {
        let start = Instant::now();
        let train = self.bench.train_dataset()?;
        let objective = CoverageObjective::new(
            &self.bench.generator,
            &train,
            self.bench.spec.metric,
            self.bench.theta,
        )?;

        let (outcome, completed) = match self.config.max_seconds {
            Some(limit) if spec.kind == OptimizerKind::LmMaEs => {
                self.run_lmmaes_guarded(spec, seed, &objective, limit)?
            }
            Some(_) => {
                return Err(Error::invalid(
                    "max_seconds",
                    "the wall-clock guard is supported for the lmmaes optimizer only",
                ))
            }
            None => {
                (optim::minimize(spec.kind, &objective, self.config.budget, &spec.params, seed)?, true)
            }
        };

        let emb = self.bench.generator.embed(&outcome.best.latent);
        let train_msc =
            matching::msc_score(&emb, &train, self.bench.spec.metric, self.bench.theta)?;
        let test = self.bench.test_dataset()?;
        let test_msc = matching::msc_score(&emb, &test, self.bench.spec.metric, self.bench.theta)?;

        let record = RunRecord {
            optimizer: spec.kind.to_string(),
            seed,
            budget: self.config.budget,
            evaluations: outcome.evaluations,
            completed,
            best_fitness: outcome.best_fitness(),
            train_msc,
            test_msc,
            best_latent: outcome.best.latent.clone(),
            wall_time_secs: start.elapsed().as_secs_f64(),
            trace: outcome.trace,
        };
        self.write_run_files(&record)?;
        log::info!(
            "run {} seed {}: train MSC {:.3}%, test MSC {:.3}%, {:.1}s",
            record.optimizer,
            seed,
            train_msc,
            test_msc,
            record.wall_time_secs
        );
        Ok(record)
    }

    /// LM-MA-ES loop with a wall-clock deadline; on timeout the state is
    /// checkpointed and the partial result returned.
    fn run_lmmaes_guarded(
        &self,
        spec: &OptimizerSpec,
        seed: u64,
        objective: &dyn optim::Objective,
        limit_secs: f64,
    ) -> Result<(RunOutcome, bool)> {
        let start = Instant::now();
        let dim = objective.dim();
        let mut state = LmMaEsState::init(
            dim,
            &LatentVector::zeros(dim),
            spec.params.sigma0,
            spec.params.lambda,
            seed,
        )?;
        let lambda = state.lambda();
        if self.config.budget < lambda as u64 {
            return Err(Error::BudgetTooSmall { budget: self.config.budget, lambda });
        }
        let mut best: Option<(LatentVector, f64)> = None;
        let mut trace = Vec::new();
        let mut used = 0u64;
        let mut interrupted = false;
        while used + lambda as u64 <= self.config.budget {
            if start.elapsed().as_secs_f64() > limit_secs {
                interrupted = true;
                break;
            }
            let mut cands = state.ask(lambda)?;
            let xs: Vec<&[f64]> = cands.iter().map(|c| c.latent.as_slice()).collect();
            let fits = evaluate_batch(objective, &xs);
            for (c, f) in cands.iter_mut().zip(&fits) {
                c.fitness = Some(*f);
                if best.as_ref().is_none_or(|(_, bf)| f < bf) {
                    best = Some((c.latent.clone(), *f));
                }
            }
            state.tell(cands)?;
            used += lambda as u64;
            trace.push(TraceRow {
                iteration: trace.len() as u64,
                evaluations_used: used,
                best_fitness: best.as_ref().unwrap().1,
                mean_pool_score: None,
                monitor_accuracy: None,
                reinit_flag: false,
            });
        }
        if interrupted {
            let tag = file_tag(spec.kind);
            let path = self.out_dir()?.join(format!("{tag}_seed{seed}_checkpoint.json"));
            let snapshot = serde_json::to_string_pretty(&state.snapshot())
                .map_err(|e| Error::Parse(e.to_string()))?;
            fs::write(&path, snapshot)?;
            log::warn!(
                "run lmmaes seed {seed}: wall-clock limit {limit_secs}s reached after {used} \
                 evaluations; state checkpointed to {}",
                path.display()
            );
        } else {
            let remainder = (self.config.budget - used) as usize;
            if remainder > 0 {
                let cands = state.ask(remainder)?;
                let xs: Vec<&[f64]> = cands.iter().map(|c| c.latent.as_slice()).collect();
                let fits = evaluate_batch(objective, &xs);
                for (c, f) in cands.iter().zip(&fits) {
                    if best.as_ref().is_none_or(|(_, bf)| f < bf) {
                        best = Some((c.latent.clone(), *f));
                    }
                }
                used += remainder as u64;
                trace.push(TraceRow {
                    iteration: trace.len() as u64,
                    evaluations_used: used,
                    best_fitness: best.as_ref().unwrap().1,
                    mean_pool_score: None,
                    monitor_accuracy: None,
                    reinit_flag: false,
                });
            }
        }
        let (latent, fitness) = best.ok_or_else(|| Error::invalid(
            "max_seconds",
            "deadline expired before the first population was evaluated",
        ))?;
        Ok((
            RunOutcome {
                best: coversearch::types::Candidate::evaluated(latent, fitness),
                evaluations: used,
                trace,
            },
            !interrupted,
        ))
    }

    fn write_run_files(&self, record: &RunRecord) -> Result<()> {
        let tag = record.optimizer.replace('+', "-");
        let dir = self.out_dir()?;
        let trace_path = dir.join(format!("{tag}_seed{}_trace.csv", record.seed));
        let mut buf = Vec::new();
        write_trace_csv(&record.trace, &mut buf)?;
        fs::write(trace_path, buf)?;
        let record_path = dir.join(format!("{tag}_seed{}_record.json", record.seed));
        let json =
            serde_json::to_string_pretty(record).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(record_path, json)?;
        Ok(())
    }

    /// Runs every (optimizer, seed) pair, picks each optimizer's champion
    /// by train MSC (never test), and writes a Table-shaped summary CSV.
    /// Failed runs become explicit rows in `failures.csv` and the summary
    /// keeps going with the seeds that succeeded.
    pub fn run_comparison(&self, optimizers: &[OptimizerSpec]) -> Result<ComparisonSummary> {
        let jobs: Vec<(usize, u64)> = (0..optimizers.len())
            .flat_map(|o| self.config.seeds.iter().map(move |&s| (o, s)))
            .collect();
        let results: Vec<(usize, u64, Result<RunRecord>)> = jobs
            .par_iter()
            .map(|&(o, seed)| (o, seed, self.run_single(&optimizers[o], seed)))
            .collect();

        let mut rows = Vec::new();
        let mut failures = Vec::new();
        let mut records = Vec::new();
        for (o, spec) in optimizers.iter().enumerate() {
            let mut champion: Option<&RunRecord> = None;
            let mut successes = 0usize;
            for (_, seed, result) in results.iter().filter(|(ro, _, _)| *ro == o) {
                match result {
                    Ok(record) => {
                        successes += 1;
                        if champion.is_none_or(|c| record.train_msc > c.train_msc) {
                            champion = Some(record);
                        }
                    }
                    Err(err) => failures.push(FailureRow {
                        optimizer: spec.kind.to_string(),
                        seed: *seed,
                        error: err.to_string(),
                    }),
                }
            }
            rows.push(SummaryRow {
                optimizer: spec.kind.to_string(),
                seed_count: successes,
                train_msc: champion.map(|c| c.train_msc),
                test_msc: champion.map(|c| c.test_msc),
            });
            records.extend(
                results
                    .iter()
                    .filter(|(ro, _, _)| *ro == o)
                    .filter_map(|(_, _, r)| r.as_ref().ok().cloned()),
            );
        }

        let summary = ComparisonSummary { rows, failures, records };
        let dir = self.out_dir()?;
        fs::write(dir.join("summary.csv"), summary.to_csv())?;
        if !summary.failures.is_empty() {
            let mut text = String::from("optimizer,seed,error\n");
            for f in &summary.failures {
                text.push_str(&format!("{},{},{}\n", f.optimizer, f.seed, f.error));
            }
            fs::write(dir.join("failures.csv"), text)?;
        }
        Ok(summary)
    }

    /// Coverage experiments over the full dataset.
    pub fn run_coverage(&self, mode: CoverageMode, count: usize) -> Result<CoverageOutcome> {
        let spec = &self.config.optimizer;
        let master = MasterOptimizer::Search {
            kind: spec.kind,
            budget: self.config.budget,
            params: spec.params.clone(),
        };
        let seed = *self.config.seeds.first().expect("validated: at least one seed");
        let dir = self.out_dir()?.to_path_buf();
        match mode {
            CoverageMode::Greedy => {
                let report = greedy_coverage(
                    &self.bench.generator,
                    &self.bench.dataset,
                    self.bench.spec.metric,
                    self.bench.theta,
                    count,
                    &master,
                    seed,
                )?;
                write_coverage_files(&dir, "greedy", &report)?;
                Ok(CoverageOutcome::Report(report))
            }
            CoverageMode::ClusterPartition => {
                let report = cluster_partition_coverage(
                    &self.bench.generator,
                    &self.bench.dataset,
                    count,
                    self.bench.spec.metric,
                    self.bench.theta,
                    &master,
                    seed,
                )?;
                write_coverage_files(&dir, "cluster-partition", &report)?;
                Ok(CoverageOutcome::Report(report))
            }
            CoverageMode::KmeansBound => {
                let (centroids, percent) = kmeans_coverage_bound(
                    &self.bench.dataset,
                    count,
                    self.bench.spec.metric,
                    self.bench.theta,
                    coversearch::coverage::kmeans::DEFAULT_RESTARTS,
                    seed,
                )?;
                let json = serde_json::json!({
                    "mode": "kmeans-bound",
                    "k": centroids.len(),
                    "percent_covered": percent,
                });
                fs::write(
                    dir.join("coverage_kmeans-bound.json"),
                    serde_json::to_string_pretty(&json).map_err(|e| Error::Parse(e.to_string()))?,
                )?;
                let mut csv = String::from("mode,k,percent_covered\n");
                csv.push_str(&format!("kmeans-bound,{},{}\n", centroids.len(), percent));
                fs::write(dir.join("coverage_kmeans-bound.csv"), csv)?;
                Ok(CoverageOutcome::Bound { k: centroids.len(), percent })
            }
        }
    }
}

fn write_coverage_files(dir: &Path, tag: &str, report: &CoverageReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(dir.join(format!("coverage_{tag}.json")), json)?;
    let mut out = Vec::new();
    writeln!(out, "iteration,new_covered,msc_reduced,msc_full,cumulative_percent")?;
    let mut cumulative = 0usize;
    for (i, it) in report.per_iteration.iter().enumerate() {
        cumulative += it.matched_ids.len();
        writeln!(
            out,
            "{},{},{},{},{}",
            i,
            it.matched_ids.len(),
            it.msc_reduced,
            it.msc_full,
            100.0 * cumulative as f64 / report.dataset_size as f64
        )?;
    }
    fs::write(dir.join(format!("coverage_{tag}.csv")), out)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverageMode {
    Greedy,
    ClusterPartition,
    KmeansBound,
}

impl std::str::FromStr for CoverageMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(CoverageMode::Greedy),
            "cluster-partition" => Ok(CoverageMode::ClusterPartition),
            "kmeans-bound" => Ok(CoverageMode::KmeansBound),
            other => Err(Error::invalid(
                "mode",
                format!("unknown `{other}` (expected greedy|cluster-partition|kmeans-bound)"),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub enum CoverageOutcome {
    Report(CoverageReport),
    Bound { k: usize, percent: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub optimizer: String,
    pub seed_count: usize,
    pub train_msc: Option<f64>,
    pub test_msc: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureRow {
    pub optimizer: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct ComparisonSummary {
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<FailureRow>,
    pub records: Vec<RunRecord>,
}

impl ComparisonSummary {
    pub fn to_csv(&self) -> String {
        let mut text = String::from("optimizer,seed_count,train_msc,test_msc\n");
        for row in &self.rows {
            let opt_field = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            text.push_str(&format!(
                "{},{},{},{}\n",
                row.optimizer,
                row.seed_count,
                opt_field(row.train_msc),
                opt_field(row.test_msc)
            ));
        }
        text
    }
}

/// Loads a record written by [`Experiment::run_single`].
pub fn load_record(path: &PathBuf) -> Result<RunRecord> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
}
