//! Black-box optimization toolkit for threshold-matcher coverage.
//!
//! The toolkit searches the latent space of a fixed generator-embedder map
//! for "master samples": inputs whose embedding is incorrectly authorized
//! by a threshold matcher for a large fraction of enrolled identities.
//!
//! Main pieces:
//!
//! - [`matching`] — the strict-threshold matcher, the normalized coverage
//!   fitness, and the MSC (mean set coverage) metric.
//! - [`optim`] — ask/tell optimizers: the limited-memory matrix adaptation
//!   ES for high dimension, plus random search, DE/rand/1/bin, and full
//!   CMA-ES baselines, all with exact evaluation budgets and seeded,
//!   reproducible streams.
//! - [`predictor`] — the success predictor: a candidate memory, an
//!   online-trained classifier that filters λ′ generated candidates down to
//!   the λ that get evaluated, and an accuracy-triggered reset.
//! - [`coverage`] — greedy multi-master coverage search, the per-cluster
//!   variant, and the generator-free k-means coverage bound.
//! - [`problems`] — the synthetic master-sample problem family (clustered
//!   unit-sphere embeddings, seeded generator, FAR-calibrated threshold)
//!   and standard benchmark functions.

pub mod coverage;
pub mod error;
pub mod matching;
pub mod optim;
pub mod predictor;
pub mod problems;
pub mod rng;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    Candidate, EmbeddingVector, IdentityDataset, LatentVector, MatchThreshold, SimilarityMetric,
};
