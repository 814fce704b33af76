//! The threshold matcher and the scores built on it: coverage fitness and
//! the MSC (mean set coverage) metric.
//!
//! All functions here are pure; they can be called concurrently.

use crate::error::{Error, Result};
use crate::types::{EmbeddingVector, IdentityDataset, LatentVector, MatchThreshold, SimilarityMetric};

/// Fixed map from latent space to embedding space. The synthetic generator
/// in [`crate::problems`] implements this; coverage fitness only needs the
/// composite map, not its internals.
pub trait LatentEmbedder: Sync {
    fn latent_dim(&self) -> usize;
    fn embedding_dim(&self) -> usize;
    fn embed(&self, z: &LatentVector) -> EmbeddingVector;
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine distance `1 - a·b / (‖a‖‖b‖)`. Errors on a zero vector.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVectorCosine);
    }
    Ok(1.0 - dot(a, b) / (na * nb))
}

/// Euclidean distance `‖a - b‖`.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Distance between two embeddings under `metric`.
pub fn distance(a: &EmbeddingVector, b: &EmbeddingVector, metric: SimilarityMetric) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    match metric {
        SimilarityMetric::CosineDistance => cosine_distance(a.as_slice(), b.as_slice()),
        SimilarityMetric::EuclideanDistance => Ok(euclidean_distance(a.as_slice(), b.as_slice())),
    }
}

/// The binary matcher: true iff `distance(a, b) < theta` (strict).
pub fn matches(
    a: &EmbeddingVector,
    b: &EmbeddingVector,
    metric: SimilarityMetric,
    theta: MatchThreshold,
) -> Result<bool> {
    Ok(distance(a, b, metric)? < theta.value())
}

/// Ids of all identities whose embedding matches `emb`.
///
/// Uses the dataset's cached norms; semantically identical to calling
/// [`matches`] per identity.
pub fn matched_ids(
    data: &IdentityDataset,
    emb: &EmbeddingVector,
    metric: SimilarityMetric,
    theta: MatchThreshold,
) -> Result<Vec<u32>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if emb.len() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), got: emb.len() });
    }
    let th = theta.value();
    let mut out = Vec::new();
    match metric {
        SimilarityMetric::CosineDistance => {
            let ne = emb.norm();
            if ne == 0.0 {
                return Err(Error::ZeroVectorCosine);
            }
            for ((id, other), nb) in data.iter().zip(data.norms()) {
                if *nb == 0.0 {
                    return Err(Error::ZeroVectorCosine);
                }
                // dist < θ  ⟺  a·b / (‖a‖‖b‖) > 1 - θ
                if dot(emb.as_slice(), other.as_slice()) > (1.0 - th) * ne * nb {
                    out.push(id);
                }
            }
        }
        SimilarityMetric::EuclideanDistance => {
            for (id, other) in data.iter() {
                if euclidean_distance(emb.as_slice(), other.as_slice()) < th {
                    out.push(id);
                }
            }
        }
    }
    Ok(out)
}

/// Number of identities matched by `emb`.
pub fn matched_count(
    data: &IdentityDataset,
    emb: &EmbeddingVector,
    metric: SimilarityMetric,
    theta: MatchThreshold,
) -> Result<usize> {
    Ok(matched_ids(data, emb, metric, theta)?.len())
}

/// Normalized minimization objective: `(n - #matched) / n`.
///
/// 0 means the candidate matches every identity, 1 means none.
pub fn coverage_fitness(
    z: &LatentVector,
    generator: &dyn LatentEmbedder,
    data: &IdentityDataset,
    metric: SimilarityMetric,
    theta: MatchThreshold,
) -> Result<f64> {
    if z.len() != generator.latent_dim() {
        return Err(Error::DimensionMismatch { expected: generator.latent_dim(), got: z.len() });
    }
    let emb = generator.embed(z);
    let n = data.len();
    let matched = matched_count(data, &emb, metric, theta)?;
    Ok((n - matched) as f64 / n as f64)
}

/// Percentage of the dataset incorrectly authorized by `emb`:
/// `100 * #matched / n`.
pub fn msc_score(
    emb: &EmbeddingVector,
    data: &IdentityDataset,
    metric: SimilarityMetric,
    theta: MatchThreshold,
) -> Result<f64> {
    let matched = matched_count(data, emb, metric, theta)?;
    Ok(100.0 * matched as f64 / data.len() as f64)
}
