use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use coversearch::optim::{read_trace_csv, OptimizerKind};
use coversearch::problems::{calibrate_theta, BenchmarkSpec, SyntheticBenchmark};
use coversearch_cli::plots;
use coversearch_cli::{
    CoverageMode, CoverageOutcome, Experiment, ExperimentConfig, OptimizerSpec,
};

#[derive(Parser)]
#[command(
    name = "coversearch",
    about = "Coverage-search experiments: master-sample optimization against threshold matchers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Experiment config JSON (defaults apply when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single seed (overrides the config's seed list).
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated seed list (overrides the config's).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Evaluation budget per run.
    #[arg(long)]
    budget: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optimizer: random|de|cmaes|lmmaes|lmmaes+predictor.
    #[arg(long)]
    optimizer: Option<String>,
    /// Wall-clock guard in seconds (lmmaes only): checkpoint and exit.
    #[arg(long)]
    max_seconds: Option<f64>,
}

impl CommonArgs {
    fn build_config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seeds = vec![seed];
        }
        if let Some(seeds) = &self.seeds {
            config.seeds = seeds.clone();
        }
        if let Some(budget) = self.budget {
            config.budget = budget;
        }
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        if let Some(name) = &self.optimizer {
            config.optimizer.kind = name.parse::<OptimizerKind>()?;
        }
        if let Some(limit) = self.max_seconds {
            config.max_seconds = Some(limit);
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// One optimization run per configured seed.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Multi-optimizer, multi-seed sweep with champion-by-train-MSC summary.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Optimizers to sweep (comma separated).
        #[arg(long, value_delimiter = ',', default_values_t = [
            "random".to_string(),
            "de".to_string(),
            "cmaes".to_string(),
            "lmmaes".to_string(),
            "lmmaes+predictor".to_string(),
        ])]
        optimizers: Vec<String>,
    },
    /// Multi-master coverage over the full dataset.
    Coverage {
        #[command(flatten)]
        common: CommonArgs,
        /// greedy | cluster-partition | kmeans-bound.
        #[arg(long)]
        mode: String,
        /// Masters/clusters/centroids to use.
        #[arg(long, default_value_t = 9)]
        count: usize,
    },
    /// Calibrate the match threshold from a FAR target.
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        /// Target false-acceptance rate.
        #[arg(long, default_value_t = 0.001)]
        far: f64,
        /// Identity pairs to sample.
        #[arg(long, default_value_t = 200_000)]
        pairs: usize,
        /// Also write the benchmark's identity dataset (.csv or .json).
        #[arg(long)]
        export_dataset: Option<PathBuf>,
    },
    /// Render SVG plots from traces and/or a coverage report.
    Plot {
        /// Trace CSV files to overlay in a convergence plot.
        #[arg(long, value_delimiter = ',')]
        traces: Vec<PathBuf>,
        /// Coverage report JSON for a bar chart.
        #[arg(long)]
        coverage: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match Cli::parse().command {
        Command::Bench { common } => {
            let config = common.build_config()?;
            let spec = config.optimizer.clone();
            let experiment = Experiment::new(config)?;
            for &seed in &experiment.config.seeds.clone() {
                let record = experiment.run_single(&spec, seed)?;
                println!(
                    "{} seed {}: train MSC {:.4}%, test MSC {:.4}%, {} evaluations{}",
                    record.optimizer,
                    seed,
                    record.train_msc,
                    record.test_msc,
                    record.evaluations,
                    if record.completed { "" } else { " (interrupted)" }
                );
            }
            println!("outputs in {}", experiment.config.out_dir.display());
        }
        Command::Compare { common, optimizers } => {
            let config = common.build_config()?;
            let base = config.optimizer.params.clone();
            let specs: Vec<OptimizerSpec> = optimizers
                .iter()
                .map(|name| {
                    Ok(OptimizerSpec { kind: name.parse::<OptimizerKind>()?, params: base.clone() })
                })
                .collect::<anyhow::Result<_>>()?;
            let experiment = Experiment::new(config)?;
            let summary = experiment.run_comparison(&specs)?;
            print!("{}", summary.to_csv());
            if !summary.failures.is_empty() {
                eprintln!("{} run(s) failed; see failures.csv", summary.failures.len());
            }
            println!("outputs in {}", experiment.config.out_dir.display());
        }
        Command::Coverage { common, mode, count } => {
            let config = common.build_config()?;
            let mode: CoverageMode = mode.parse()?;
            let experiment = Experiment::new(config)?;
            match experiment.run_coverage(mode, count)? {
                CoverageOutcome::Report(report) => {
                    println!(
                        "{} masters, cumulative coverage {:.4}% of {} identities",
                        report.masters.len(),
                        report.cumulative_percent,
                        report.dataset_size
                    );
                    let svg = plots::coverage_svg(&report)?;
                    let path = experiment.config.out_dir.join("coverage.svg");
                    std::fs::write(&path, svg)?;
                    println!("plot: {}", path.display());
                }
                CoverageOutcome::Bound { k, percent } => {
                    println!("kmeans-bound k={k}: {percent:.4}% coverable without the generator");
                }
            }
        }
        Command::Calibrate { common, far, pairs, export_dataset } => {
            let config = common.build_config()?;
            let spec: BenchmarkSpec = config.problem.resolve()?;
            let bench = SyntheticBenchmark::build(&spec)?;
            let theta = calibrate_theta(&bench.dataset, spec.metric, far, pairs, spec.seed)?;
            println!(
                "theta = {} ({} at FAR target {far}, {pairs} sampled pairs)",
                theta.value(),
                spec.metric
            );
            if let Some(path) = export_dataset {
                bench.dataset.save_csv(&path)?;
                println!("dataset written to {}", path.display());
            }
        }
        Command::Plot { traces, coverage, out } => {
            if traces.is_empty() && coverage.is_none() {
                bail!("give --traces and/or --coverage");
            }
            std::fs::create_dir_all(&out)?;
            if !traces.is_empty() {
                let mut series = Vec::new();
                for path in &traces {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    let rows = read_trace_csv(&text)?;
                    let label = path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "trace".into());
                    series.push((label, rows));
                }
                let borrowed: Vec<(String, &[_])> =
                    series.iter().map(|(l, r)| (l.clone(), r.as_slice())).collect();
                let svg = plots::convergence_svg(&borrowed)?;
                let path = out.join("convergence.svg");
                std::fs::write(&path, svg)?;
                println!("wrote {}", path.display());
            }
            if let Some(path) = coverage {
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let report: coversearch::coverage::CoverageReport = serde_json::from_str(&text)?;
                let svg = plots::coverage_svg(&report)?;
                let dest = out.join("coverage.svg");
                std::fs::write(&dest, svg)?;
                println!("wrote {}", dest.display());
            }
        }
    }
    Ok(())
}
