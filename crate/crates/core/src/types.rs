//! Domain types: latent and embedding vectors, similarity metrics, match
//! thresholds, candidates, and identity datasets.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the optimizer's search space (dimension `d`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentVector(pub Vec<f64>);

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()), "latent has non-finite entry");
        LatentVector(values)
    }

    pub fn zeros(dim: usize) -> Self {
        LatentVector(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A point in the matcher's embedding space (dimension `e`).
///
/// Stored unnormalized; cosine distance normalizes inside the metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()), "embedding has non-finite entry");
        EmbeddingVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Distance kind used by the threshold matcher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityMetric {
    #[serde(alias = "cosine")]
    CosineDistance,
    #[serde(alias = "euclidean")]
    EuclideanDistance,
}

impl fmt::Display for SimilarityMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimilarityMetric::CosineDistance => write!(f, "cosine-distance"),
            SimilarityMetric::EuclideanDistance => write!(f, "euclidean-distance"),
        }
    }
}

/// Matching threshold θ; two embeddings match when their distance is
/// strictly below it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatchThreshold(f64);

impl MatchThreshold {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::invalid("theta", format!("must be finite and > 0, got {theta}")));
        }
        Ok(MatchThreshold(theta))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// A latent vector together with its fitness, once evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub latent: LatentVector,
    pub fitness: Option<f64>,
}

impl Candidate {
    pub fn new(latent: LatentVector) -> Self {
        Candidate { latent, fitness: None }
    }

    pub fn evaluated(latent: LatentVector, fitness: f64) -> Self {
        Candidate { latent, fitness: Some(fitness) }
    }

    /// Fitness, or an error if the candidate was never evaluated.
    pub fn fitness_checked(&self) -> Result<f64> {
        match self.fitness {
            Some(f) if f.is_finite() => Ok(f),
            Some(_) => Err(Error::NonFiniteFitness),
            None => Err(Error::UnevaluatedCandidate),
        }
    }
}

/// One embedding per enrolled identity.
///
/// Ids are unique but not necessarily contiguous: coverage search removes
/// covered identities and keeps the original ids in the reduced dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityDataset {
    ids: Vec<u32>,
    embeddings: Vec<EmbeddingVector>,
    /// Cached L2 norms, one per embedding (hot path for cosine matching).
    norms: Vec<f64>,
}

impl IdentityDataset {
    pub fn new(ids: Vec<u32>, embeddings: Vec<EmbeddingVector>) -> Result<Self> {
        if ids.len() != embeddings.len() {
            return Err(Error::invalid(
                "ids",
                format!("{} ids for {} embeddings", ids.len(), embeddings.len()),
            ));
        }
        if embeddings.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dim = embeddings[0].len();
        let mut seen = BTreeSet::new();
        for (id, emb) in ids.iter().zip(&embeddings) {
            if !seen.insert(*id) {
                return Err(Error::DuplicateId(*id));
            }
            if emb.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: emb.len() });
            }
            if emb.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("embedding", format!("id {id} has a non-finite entry")));
            }
        }
        let norms = embeddings.iter().map(|e| e.norm()).collect();
        Ok(IdentityDataset { ids, embeddings, norms })
    }

    /// Convenience constructor with ids `0..n-1`.
    pub fn from_embeddings(embeddings: Vec<EmbeddingVector>) -> Result<Self> {
        let ids = (0..embeddings.len() as u32).collect();
        Self::new(ids, embeddings)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings[0].len()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn embeddings(&self) -> &[EmbeddingVector] {
        &self.embeddings
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &EmbeddingVector)> {
        self.ids.iter().copied().zip(self.embeddings.iter())
    }

    /// Dataset restricted to `keep` (ids not present are ignored).
    pub fn subset(&self, keep: &BTreeSet<u32>) -> Result<Self> {
        let mut ids = Vec::new();
        let mut embeddings = Vec::new();
        for (id, emb) in self.iter() {
            if keep.contains(&id) {
                ids.push(id);
                embeddings.push(emb.clone());
            }
        }
        Self::new(ids, embeddings)
    }

    /// Dataset with `remove` taken out. Errors if nothing remains.
    pub fn without(&self, remove: &BTreeSet<u32>) -> Result<Self> {
        let mut ids = Vec::new();
        let mut embeddings = Vec::new();
        for (id, emb) in self.iter() {
            if !remove.contains(&id) {
                ids.push(id);
                embeddings.push(emb.clone());
            }
        }
        Self::new(ids, embeddings)
    }

    /// Loads a dataset, picking the format from the file extension
    /// (`.csv` or `.json`).
    pub fn load(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Self::load_csv(path),
            Some("json") => Self::load_json(path),
            other => Err(Error::Parse(format!(
                "unsupported dataset extension {other:?} (expected .csv or .json)"
            ))),
        }
    }

    /// CSV with header `id,v0,...,v{e-1}`, one row per identity.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty csv".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"id") {
            return Err(Error::Parse(format!("csv header must start with `id`, got `{header}`")));
        }
        let dim = cols.len() - 1;
        let mut ids = Vec::new();
        let mut embeddings = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 1 {
                return Err(Error::Parse(format!(
                    "csv line {}: expected {} fields, got {}",
                    lineno + 2,
                    dim + 1,
                    fields.len()
                )));
            }
            let id: u32 = fields[0]
                .parse()
                .map_err(|e| Error::Parse(format!("csv line {}: bad id: {e}", lineno + 2)))?;
            let mut values = Vec::with_capacity(dim);
            for f in &fields[1..] {
                let v: f64 = f
                    .parse()
                    .map_err(|e| Error::Parse(format!("csv line {}: bad value: {e}", lineno + 2)))?;
                if !v.is_finite() {
                    return Err(Error::Parse(format!("csv line {}: non-finite value", lineno + 2)));
                }
                values.push(v);
            }
            ids.push(id);
            embeddings.push(EmbeddingVector(values));
        }
        Self::new(ids, embeddings)
    }

    /// JSON array of `{ "id": u32, "values": [f64] }`.
    pub fn load_json(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Record {
            id: u32,
            values: Vec<f64>,
        }
        let text = fs::read_to_string(path)?;
        let records: Vec<Record> =
            serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut ids = Vec::with_capacity(records.len());
        let mut embeddings = Vec::with_capacity(records.len());
        for r in records {
            if r.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse(format!("id {}: non-finite value", r.id)));
            }
            ids.push(r.id);
            embeddings.push(EmbeddingVector(r.values));
        }
        Self::new(ids, embeddings)
    }

    /// Writes the CSV form accepted by [`IdentityDataset::load_csv`].
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = fs::File::create(path)?;
        write!(out, "id")?;
        for i in 0..self.dim() {
            write!(out, ",v{i}")?;
        }
        writeln!(out)?;
        for (id, emb) in self.iter() {
            write!(out, "{id}")?;
            for v in emb.as_slice() {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
