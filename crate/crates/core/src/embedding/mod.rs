//! Turn-text embeddings: a deterministic mock, an HTTP provider, and a
//! content-addressed disk cache in front of both.

mod cache;
mod provider;
mod service;

pub use cache::{cache_key, EmbeddingCache};
pub use provider::{
    EmbedderRegistry, EmbeddingConfig, EmbeddingProvider, HttpEmbeddingProvider, MockEmbeddingProvider,
};
pub use service::{EmbeddingService, EmbeddingStats};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gateway::GatewayError;

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("no texts to embed")]
    EmptyInput,
    #[error("embedding dimension {got} does not match expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("embedding contains non-finite values")]
    NonFinite,
    #[error("dimension must be at least 2, got {0}")]
    DimTooSmall(usize),
    #[error("embedding provider: {0}")]
    Provider(#[from] GatewayError),
    #[error("malformed embedding response: {0}")]
    Malformed(String),
    #[error("embedding config: {0}")]
    Config(String),
    #[error("cache: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model_id: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, model_id: impl Into<String>) -> Result<Self, EmbeddingError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        Ok(Self { values, model_id: model_id.into() })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// 1 - cos(u, v), in [0, 2].
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::DimensionMismatch { expected: u.len(), got: v.len() });
    }
    let (mut dot, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    let cos = (dot / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0);
    Ok(1.0 - cos)
}

/// Deterministic unit vector: standard normals from a generator seeded with
/// SHA-256(text || seed).
pub fn mock_embed(text: &str, dim: usize, seed: u64) -> Result<EmbeddingVector, EmbeddingError> {
    if dim < 2 {
        return Err(EmbeddingError::DimTooSmall(dim));
    }
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    h.update(seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
    let mut values: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    values.iter_mut().for_each(|v| *v /= norm);
    EmbeddingVector::new(values, format!("mock-{dim}"))
}
