//! Objective functions: standard benchmark functions for optimizer sanity
//! checks, and the synthetic master-sample problem family — a clustered
//! identity dataset on the unit sphere plus a fixed seeded generator map
//! from latent space into embedding space, with the match threshold
//! calibrated to a target false-acceptance rate.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{self, LatentEmbedder};
use crate::optim::Objective;
use crate::rng;
use crate::types::{
    EmbeddingVector, IdentityDataset, LatentVector, MatchThreshold, SimilarityMetric,
};

// ---------------------------------------------------------------------------
// Benchmark functions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkFunction {
    Sphere,
    Ellipsoid,
    Rosenbrock,
    Rastrigin,
}

impl BenchmarkFunction {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            BenchmarkFunction::Sphere => x.iter().map(|v| v * v).sum(),
            BenchmarkFunction::Ellipsoid => {
                let d = x.len();
                if d == 1 {
                    return x[0] * x[0];
                }
                x.iter()
                    .enumerate()
                    .map(|(i, v)| 10f64.powf(6.0 * i as f64 / (d as f64 - 1.0)) * v * v)
                    .sum()
            }
            BenchmarkFunction::Rosenbrock => x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
            BenchmarkFunction::Rastrigin => {
                10.0 * x.len() as f64
                    + x.iter()
                        .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos())
                        .sum::<f64>()
            }
        }
    }
}

/// A benchmark function pinned to a dimension, usable as an objective.
#[derive(Debug, Clone, Copy)]
pub struct BenchmarkObjective {
    pub kind: BenchmarkFunction,
    pub dim: usize,
}

impl Objective for BenchmarkObjective {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.kind.evaluate(x)
    }
}

// ---------------------------------------------------------------------------
// Synthetic dataset and generator
// ---------------------------------------------------------------------------

/// Fixed map `z ↦ normalize(A·tanh(B·z) + b0)` standing in for the
/// generator-plus-descriptor pipeline. The columns of `A` are embeddings
/// sampled from the dataset, which keeps the reachable set overlapping the
/// identity region; `B` and `b0` are seeded Gaussians. Outputs are always
/// unit norm.
#[derive(Debug, Clone)]
pub struct GeneratorEmbedder {
    input_dim: usize,
    output_dim: usize,
    hidden_dim: usize,
    /// e × q, column j is a (scaled) dataset embedding.
    a: Vec<f64>,
    /// q × d.
    b: Vec<f64>,
    /// length e.
    bias: Vec<f64>,
    seed: u64,
}

impl GeneratorEmbedder {
    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl LatentEmbedder for GeneratorEmbedder {
    fn latent_dim(&self) -> usize {
        self.input_dim
    }

    fn embedding_dim(&self) -> usize {
        self.output_dim
    }

    fn embed(&self, z: &LatentVector) -> EmbeddingVector {
        let d = self.input_dim;
        let q = self.hidden_dim;
        let e = self.output_dim;
        debug_assert_eq!(z.len(), d);
        let zs = z.as_slice();
        let mut t = vec![0.0; q];
        for (i, ti) in t.iter_mut().enumerate() {
            let row = &self.b[i * d..(i + 1) * d];
            let dot: f64 = row.iter().zip(zs).map(|(a, b)| a * b).sum();
            *ti = dot.tanh();
        }
        let mut out = vec![0.0; e];
        for (i, oi) in out.iter_mut().enumerate() {
            let row = &self.a[i * q..(i + 1) * q];
            let dot: f64 = row.iter().zip(&t).map(|(a, b)| a * b).sum();
            *oi = dot + self.bias[i];
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut out {
                *v /= norm;
            }
        }
        EmbeddingVector::new(out)
    }
}

/// Builds a clustered identity dataset: cluster centers uniform on the unit
/// sphere, cluster sizes skewed (Zipf-like) so clusters are unequal, each
/// identity `normalize(center + spread·noise)`.
pub fn make_dataset(
    n: usize,
    e: usize,
    clusters: usize,
    spread: f64,
    seed: u64,
) -> Result<IdentityDataset> {
    if clusters < 1 || n < clusters {
        return Err(Error::invalid("clusters", format!("need n >= clusters >= 1, got n={n}, clusters={clusters}")));
    }
    if e < 1 {
        return Err(Error::invalid("e", "embedding dimension must be >= 1"));
    }
    if !(spread >= 0.0) || !spread.is_finite() {
        return Err(Error::invalid("spread", "must be finite and >= 0"));
    }
    let mut stream = rng::substream(seed, "dataset");

    let mut centers = Vec::with_capacity(clusters);
    for _ in 0..clusters {
        centers.push(unit_gaussian_direction(e, &mut stream));
    }

    let sizes = zipf_allocation(n, clusters);
    debug_assert_eq!(sizes.iter().sum::<usize>(), n);

    let mut embeddings = Vec::with_capacity(n);
    for (center, &size) in centers.iter().zip(&sizes) {
        for _ in 0..size {
            let mut v: Vec<f64> = center
                .iter()
                .map(|c| {
                    let g: f64 = StandardNormal.sample(&mut stream);
                    c + spread * g
                })
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for x in &mut v {
                    *x /= norm;
                }
            } else {
                v = center.clone();
            }
            embeddings.push(EmbeddingVector::new(v));
        }
    }
    IdentityDataset::from_embeddings(embeddings)
}

fn unit_gaussian_direction(dim: usize, stream: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(stream)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Splits `n` into `clusters` parts with weights ∝ 1/rank, every part >= 1,
/// remainders to the largest fractional shares (ties to the lower index).
fn zipf_allocation(n: usize, clusters: usize) -> Vec<usize> {
    let weights: Vec<f64> = (1..=clusters).map(|r| 1.0 / r as f64).collect();
    let total: f64 = weights.iter().sum();
    let spare = n - clusters; // one guaranteed member per cluster
    let targets: Vec<f64> = weights.iter().map(|w| spare as f64 * w / total).collect();
    let mut sizes: Vec<usize> = targets.iter().map(|t| t.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..clusters).collect();
    order.sort_by(|&a, &b| {
        let fa = targets[a] - targets[a].floor();
        let fb = targets[b] - targets[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &idx in order.iter().take(spare - assigned) {
        sizes[idx] += 1;
    }
    for s in &mut sizes {
        *s += 1;
    }
    sizes
}

/// Builds the generator for a dataset: `B` and `b0` seeded Gaussians
/// (`B` entries scaled by 1/sqrt(d) so hidden pre-activations are O(1) for
/// prior latents), columns of `A` sampled dataset embeddings.
pub fn make_generator(
    data: &IdentityDataset,
    d: usize,
    q: usize,
    seed: u64,
) -> Result<GeneratorEmbedder> {
    if d < 1 || q < 1 {
        return Err(Error::invalid("dims", "d and q must be >= 1"));
    }
    if q > data.len() {
        log::warn!("make_generator: hidden dim q={q} exceeds dataset size {}", data.len());
    }
    let e = data.dim();
    let mut stream = rng::substream(seed, "generator");

    let b_scale = 1.0 / (d as f64).sqrt();
    let b: Vec<f64> = (0..q * d)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut stream);
            g * b_scale
        })
        .collect();

    let bias_scale = 0.05;
    let bias: Vec<f64> = (0..e)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut stream);
            g * bias_scale
        })
        .collect();

    // column j of A = a sampled dataset embedding
    let mut a = vec![0.0; e * q];
    for j in 0..q {
        let pick = stream.random_range(0..data.len());
        let emb = data.embeddings()[pick].as_slice();
        for i in 0..e {
            a[i * q + j] = emb[i];
        }
    }

    Ok(GeneratorEmbedder { input_dim: d, output_dim: e, hidden_dim: q, a, b, bias, seed })
}

/// Calibrates θ as the empirical `far_target`-quantile (nearest rank) of
/// distances over sampled distinct identity pairs, so a random pair matches
/// with probability ≈ `far_target`. Enumerates all pairs when the sample
/// budget covers them; `far_target >= 1` steps just above the maximum so
/// everything sampled matches.
pub fn calibrate_theta(
    data: &IdentityDataset,
    metric: SimilarityMetric,
    far_target: f64,
    sample_pairs: usize,
    seed: u64,
) -> Result<MatchThreshold> {
    if data.len() < 2 {
        return Err(Error::DegenerateDataset("need at least two identities".into()));
    }
    if !(far_target > 0.0 && far_target <= 1.0) {
        return Err(Error::invalid("far_target", format!("must be in (0, 1], got {far_target}")));
    }
    if sample_pairs < 1 {
        return Err(Error::invalid("sample_pairs", "must be >= 1"));
    }
    let n = data.len();
    let all_pairs = n * (n - 1) / 2;
    let mut distances = Vec::new();
    if sample_pairs >= all_pairs {
        for i in 0..n {
            for j in (i + 1)..n {
                distances.push(matching::distance(
                    &data.embeddings()[i],
                    &data.embeddings()[j],
                    metric,
                )?);
            }
        }
    } else {
        let mut stream = rng::substream(seed, "calibrate");
        for _ in 0..sample_pairs {
            let i = stream.random_range(0..n);
            let j = loop {
                let j = stream.random_range(0..n);
                if j != i {
                    break j;
                }
            };
            distances.push(matching::distance(
                &data.embeddings()[i],
                &data.embeddings()[j],
                metric,
            )?);
        }
    }
    distances.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let theta = if far_target >= 1.0 {
        next_up(*distances.last().expect("nonempty"))
    } else {
        let k = ((far_target * distances.len() as f64).ceil() as usize).max(1);
        distances[k - 1]
    };
    if !(theta > 0.0) {
        return Err(Error::DegenerateDataset(format!(
            "calibrated threshold {theta} is not positive; distances are collapsed"
        )));
    }
    MatchThreshold::new(theta)
}

fn next_up(v: f64) -> f64 {
    if v == 0.0 {
        f64::MIN_POSITIVE
    } else {
        f64::from_bits(v.to_bits() + 1)
    }
}

// ---------------------------------------------------------------------------
// The synthetic benchmark
// ---------------------------------------------------------------------------

/// Parameters of the synthetic master-sample problem, loadable from JSON.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub n: usize,
    pub e: usize,
    pub d: usize,
    pub q: usize,
    pub clusters: usize,
    pub spread: f64,
    pub metric: SimilarityMetric,
    pub far_target: f64,
    pub seed: u64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            n: 5749,
            e: 128,
            d: 512,
            q: 64,
            clusters: 20,
            spread: 0.25,
            metric: SimilarityMetric::CosineDistance,
            far_target: 0.001,
            seed: 0,
        }
    }
}

impl BenchmarkSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
    }
}

const CALIBRATION_PAIRS: usize = 200_000;
const TRAIN_FRACTION: f64 = 0.70;

/// A fully constructed problem instance: dataset, generator, calibrated
/// threshold, and a seeded 70/30 train/test split.
#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub spec: BenchmarkSpec,
    pub dataset: IdentityDataset,
    pub generator: GeneratorEmbedder,
    pub theta: MatchThreshold,
    pub train_ids: Vec<u32>,
    pub test_ids: Vec<u32>,
}

impl SyntheticBenchmark {
    pub fn build(spec: &BenchmarkSpec) -> Result<Self> {
        let dataset = make_dataset(spec.n, spec.e, spec.clusters, spec.spread, spec.seed)?;
        let theta =
            calibrate_theta(&dataset, spec.metric, spec.far_target, CALIBRATION_PAIRS, spec.seed)?;
        let generator = make_generator(&dataset, spec.d, spec.q, spec.seed)?;

        // seeded permutation split
        let mut order: Vec<u32> = dataset.ids().to_vec();
        let mut stream = rng::substream(spec.seed, "split");
        for i in (1..order.len()).rev() {
            let j = stream.random_range(0..=i);
            order.swap(i, j);
        }
        let cut = ((spec.n as f64) * TRAIN_FRACTION).floor() as usize;
        let mut train_ids: Vec<u32> = order[..cut].to_vec();
        let mut test_ids: Vec<u32> = order[cut..].to_vec();
        train_ids.sort_unstable();
        test_ids.sort_unstable();

        Ok(SyntheticBenchmark { spec: spec.clone(), dataset, generator, theta, train_ids, test_ids })
    }

    pub fn train_dataset(&self) -> Result<IdentityDataset> {
        self.dataset.subset(&self.train_ids.iter().copied().collect())
    }

    pub fn test_dataset(&self) -> Result<IdentityDataset> {
        self.dataset.subset(&self.test_ids.iter().copied().collect())
    }
}

/// Coverage-fitness objective over a fixed dataset: `(n - #matched) / n`.
pub struct CoverageObjective<'a> {
    generator: &'a dyn LatentEmbedder,
    data: &'a IdentityDataset,
    metric: SimilarityMetric,
    theta: MatchThreshold,
}

impl<'a> CoverageObjective<'a> {
    pub fn new(
        generator: &'a dyn LatentEmbedder,
        data: &'a IdentityDataset,
        metric: SimilarityMetric,
        theta: MatchThreshold,
    ) -> Result<Self> {
        if generator.embedding_dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                got: generator.embedding_dim(),
            });
        }
        Ok(CoverageObjective { generator, data, metric, theta })
    }
}

impl Objective for CoverageObjective<'_> {
    fn dim(&self) -> usize {
        self.generator.latent_dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let z = LatentVector::new(x.to_vec());
        matching::coverage_fitness(&z, self.generator, self.data, self.metric, self.theta)
            .expect("dimensions checked at construction")
    }
}
