//! Text embeddings and fold-local standardization.

mod cache;
mod provider;

pub use cache::{CachedEmbedder, CacheMode};
pub use provider::{
    EmbeddingProvider, HashingEmbedder, MockEmbedder, RemoteEmbedder, ENV_EMBED_KEY, ENV_EMBED_MODEL, ENV_EMBED_URL,
};

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashing::sha256_hex;

pub const DEFAULT_DIM: usize = 768;
/// Floor applied to per-dimension standard deviations.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite value in embedding")]
    NonFinite,
    #[error("need at least 2 vectors to fit a standardizer, got {0}")]
    TooFewVectors(usize),
    #[error("no cached embedding for text {0} (replay mode)")]
    CacheMiss(String),
    #[error("embedding provider: {0}")]
    Provider(String),
    #[error("embedding cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|v| v * factor).collect())
    }
}

impl AsRef<[f64]> for EmbeddingVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Content hash used as the cache key for a text.
pub fn text_hash(text: &str) -> String {
    sha256_hex(text.as_bytes())
}

/// Embeds raw text (no normalization of disfluencies).
pub fn embed(text: &str, provider: &dyn EmbeddingProvider) -> Result<EmbeddingVector, EmbeddingError> {
    if text.is_empty() {
        return Err(EmbeddingError::EmptyText);
    }
    let values = provider.embed(text)?;
    if values.len() != provider.dim() {
        return Err(EmbeddingError::DimMismatch {
            expected: provider.dim(),
            got: values.len(),
        });
    }
    EmbeddingVector::new(values)
}

/// Embeds many texts with at most `jobs` concurrent provider calls.
pub fn embed_batch(
    texts: &[&str],
    provider: &dyn EmbeddingProvider,
    jobs: usize,
) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| EmbeddingError::Provider(e.to_string()))?
        .install(|| texts.par_iter().map(|t| embed(t, provider)).collect())
}

/// Text -> vector lookup keyed by content hash.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    by_hash: HashMap<String, EmbeddingVector>,
}

impl EmbeddingTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Embeds every distinct text not already present.
    pub fn build<'a>(
        texts: impl IntoIterator<Item = &'a str>,
        provider: &dyn EmbeddingProvider,
        jobs: usize,
    ) -> Result<Self, EmbeddingError> {
        let mut seen = std::collections::BTreeMap::new();
        for t in texts {
            seen.entry(text_hash(t)).or_insert(t);
        }
        let texts: Vec<&str> = seen.values().copied().collect();
        let vectors = embed_batch(&texts, provider, jobs)?;
        let mut table = Self::new();
        for (t, v) in texts.into_iter().zip(vectors) {
            table.insert(t, v);
        }
        Ok(table)
    }

    pub fn insert(&mut self, text: &str, v: EmbeddingVector) {
        self.by_hash.insert(text_hash(text), v);
    }

    pub fn get(&self, text: &str) -> Option<&EmbeddingVector> {
        self.by_hash.get(&text_hash(text))
    }

    pub fn len(&self) -> usize {
        self.by_hash.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_hash.is_empty()
    }

    /// Copy with every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            by_hash: self.by_hash.iter().map(|(k, v)| (k.clone(), v.scaled(factor))).collect(),
        }
    }
}

/// Per-dimension centering and scaling fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at [`STD_FLOOR`].
    pub std: Vec<f64>,
    pub fitted_on: usize,
}

impl Standardizer {
    pub fn fit<V: AsRef<[f64]>>(train: &[V]) -> Result<Self, EmbeddingError> {
        if train.len() < 2 {
            return Err(EmbeddingError::TooFewVectors(train.len()));
        }
        let dim = train[0].as_ref().len();
        for v in train {
            if v.as_ref().len() != dim {
                return Err(EmbeddingError::DimMismatch {
                    expected: dim,
                    got: v.as_ref().len(),
                });
            }
        }
        let n = train.len() as f64;
        let mut mean = vec![0.0; dim];
        for v in train {
            for (m, x) in mean.iter_mut().zip(v.as_ref()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for v in train {
            for ((s, x), m) in var.iter_mut().zip(v.as_ref()).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Self {
            mean,
            std,
            fitted_on: train.len(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>, EmbeddingError> {
        if v.len() != self.dim() {
            return Err(EmbeddingError::DimMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }

    pub fn invert(&self, z: &[f64]) -> Result<Vec<f64>, EmbeddingError> {
        if z.len() != self.dim() {
            return Err(EmbeddingError::DimMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| x * s + m)
            .collect())
    }
}

pub fn fit_standardizer(train: &[EmbeddingVector]) -> Result<Standardizer, EmbeddingError> {
    Standardizer::fit(train)
}

pub fn apply_standardizer(s: &Standardizer, v: &EmbeddingVector) -> Result<EmbeddingVector, EmbeddingError> {
    EmbeddingVector::new(s.apply(v.values())?)
}
