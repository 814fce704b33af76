//! Experiment configuration: versioned JSON, unknown fields rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use coversearch::error::{Error, Result};
use coversearch::optim::{OptimizerKind, OptimizerParams};
use coversearch::problems::BenchmarkSpec;

pub const CONFIG_VERSION: u32 = 1;

fn default_version() -> u32 {
    CONFIG_VERSION
}

fn default_budget() -> u64 {
    26_400
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

/// Where the problem comes from: a benchmark spec file, an inline spec, or
/// (when both are absent) the default benchmark.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<BenchmarkSpec>,
}

impl ProblemSource {
    pub fn resolve(&self) -> Result<BenchmarkSpec> {
        match (&self.file, &self.spec) {
            (Some(_), Some(_)) => {
                Err(Error::invalid("problem", "give either `file` or `spec`, not both"))
            }
            (Some(path), None) => BenchmarkSpec::load(path),
            (None, Some(spec)) => Ok(spec.clone()),
            (None, None) => Ok(BenchmarkSpec::default()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub params: OptimizerParams,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        OptimizerSpec { kind: OptimizerKind::LmMaEs, params: OptimizerParams::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Schema version; must equal [`CONFIG_VERSION`].
    pub version: u32,
    pub problem: ProblemSource,
    pub optimizer: OptimizerSpec,
    /// Total true-fitness evaluations per run.
    pub budget: u64,
    pub seeds: Vec<u64>,
    /// Output directory for traces, records, summaries, and reports.
    pub out_dir: PathBuf,
    /// Optional wall-clock guard (seconds); a run past the deadline
    /// checkpoints its optimizer state and exits cleanly.
    pub max_seconds: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: default_version(),
            problem: ProblemSource::default(),
            optimizer: OptimizerSpec::default(),
            budget: default_budget(),
            seeds: default_seeds(),
            out_dir: PathBuf::from("out"),
            max_seconds: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::invalid(
                "version",
                format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version),
            ));
        }
        if self.budget < 1 {
            return Err(Error::invalid("budget", "must be >= 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "need at least one seed"));
        }
        if let Some(s) = self.max_seconds {
            if !(s > 0.0) {
                return Err(Error::invalid("max_seconds", "must be > 0"));
            }
        }
        self.problem.resolve()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let config = ExperimentConfig::default();
        config.validate().unwrap();
        assert_eq!(config.budget, 26_400);
        assert_eq!(config.seeds, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn unknown_fields_rejected() {
        let json = r#"{"version":1,"budget":100,"frobnicate":true}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(json).is_err());
    }

    #[test]
    fn version_mismatch_rejected() {
        let json = r#"{"version":2}"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn problem_source_exclusivity() {
        let bad = ProblemSource {
            file: Some(PathBuf::from("x.json")),
            spec: Some(BenchmarkSpec::default()),
        };
        assert!(bad.resolve().is_err());
        assert_eq!(ProblemSource::default().resolve().unwrap(), BenchmarkSpec::default());
    }

    #[test]
    fn problem_source_loads_spec_files() {
        let dir = std::env::temp_dir()
            .join(format!("covs-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bench.json");
        let spec = BenchmarkSpec { n: 77, seed: 9, ..BenchmarkSpec::default() };
        std::fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();
        let source = ProblemSource { file: Some(path), spec: None };
        assert_eq!(source.resolve().unwrap(), spec);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn round_trips_through_json() {
        let config = ExperimentConfig {
            budget: 440,
            seeds: vec![7],
            optimizer: OptimizerSpec {
                kind: OptimizerKind::LmMaEsPredictor,
                params: OptimizerParams::default(),
            },
            ..ExperimentConfig::default()
        };
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.budget, 440);
        assert_eq!(back.optimizer.kind, OptimizerKind::LmMaEsPredictor);
    }
}
