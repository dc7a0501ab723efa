use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::EmbeddingError;
use crate::hashing::seed_bytes;

/// Deterministic text -> vector map.
pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbeddingError>;
}

/// Seeded hash of the text expanded to `dim` uniform values in [-1, 1].
/// Text-sensitive but carries no semantics.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    seed: u64,
    dim: usize,
    id: String,
}

impl MockEmbedder {
    pub fn new(seed: u64, dim: usize) -> Self {
        Self {
            seed,
            dim,
            id: format!("mock-hash-v1-s{seed}-d{dim}"),
        }
    }
}

impl EmbeddingProvider for MockEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        let mut material = self.seed.to_le_bytes().to_vec();
        material.extend_from_slice(text.as_bytes());
        let mut rng = ChaCha8Rng::from_seed(seed_bytes(&material));
        Ok((0..self.dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
    }
}

/// Signed feature hashing of character unigrams and bigrams, L2-normalized.
/// Texts sharing surface material land close in cosine terms, which makes
/// similarity-guided selection meaningful offline.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    id: String,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            id: format!("ngram-hash-v1-d{dim}"),
        }
    }

    fn bucket(&self, gram: &str) -> (usize, f64) {
        let h = seed_bytes(gram.as_bytes());
        let idx = u64::from_le_bytes(h[..8].try_into().expect("8 bytes")) as usize % self.dim;
        let sign = if h[8] & 1 == 0 { 1.0 } else { -1.0 };
        (idx, sign)
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        let mut v = vec![0.0; self.dim];
        let mut buf = String::new();
        for (i, c) in chars.iter().enumerate() {
            buf.clear();
            buf.push(*c);
            let (idx, sign) = self.bucket(&buf);
            v[idx] += sign;
            if let Some(next) = chars.get(i + 1) {
                buf.push(*next);
                let (idx, sign) = self.bucket(&buf);
                v[idx] += sign;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

pub const ENV_EMBED_URL: &str = "COGAUG_EMBED_URL";
pub const ENV_EMBED_KEY: &str = "COGAUG_EMBED_API_KEY";
pub const ENV_EMBED_MODEL: &str = "COGAUG_EMBED_MODEL";

/// Remote sentence-encoder client. Sends `{"model", "input"}` and reads
/// `data[0].embedding` or a top-level `embedding` array.
pub struct RemoteEmbedder {
    id: String,
    endpoint: String,
    api_key: String,
    model: String,
    dim: usize,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, model: impl Into<String>, dim: usize) -> Self {
        let model = model.into();
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            id: format!("remote:{model}"),
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            model,
            dim,
            agent,
        }
    }

    pub fn from_env(dim: usize) -> Result<Self, EmbeddingError> {
        let missing = |v: &str| EmbeddingError::Provider(format!("{v} is not set"));
        let endpoint = std::env::var(ENV_EMBED_URL).map_err(|_| missing(ENV_EMBED_URL))?;
        let key = std::env::var(ENV_EMBED_KEY).map_err(|_| missing(ENV_EMBED_KEY))?;
        let model = std::env::var(ENV_EMBED_MODEL)
            .unwrap_or_else(|_| "sonoisa/sentence-bert-base-ja-mean-tokens-v2".to_string());
        Ok(Self::new(endpoint, key, model, dim))
    }
}

pub(crate) fn extract_embedding(v: &Value) -> Option<Vec<f64>> {
    v.pointer("/data/0/embedding")
        .or_else(|| v.get("embedding"))
        .and_then(Value::as_array)
        .and_then(|a| a.iter().map(Value::as_f64).collect())
}

impl EmbeddingProvider for RemoteEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        let body = json!({"model": self.model, "input": text});
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| EmbeddingError::Provider(e.to_string()))?;
        let status = resp.status().as_u16();
        let raw = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| EmbeddingError::Provider(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(EmbeddingError::Provider(format!("status {status}: {raw}")));
        }
        let v: Value = serde_json::from_str(&raw).map_err(|e| EmbeddingError::Provider(e.to_string()))?;
        extract_embedding(&v).ok_or_else(|| EmbeddingError::Provider("no embedding in response".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_values_are_bounded_and_seed_sensitive() {
        let a = MockEmbedder::new(1, 64).embed("テキスト").unwrap();
        let b = MockEmbedder::new(2, 64).embed("テキスト").unwrap();
        assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_ne!(a, b);
    }

    #[test]
    fn hashing_embedder_reflects_overlap() {
        let e = HashingEmbedder::new(256);
        let cos = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        let base = e.embed("孫が公園に来てくれました").unwrap();
        let near = e.embed("えっと、孫が公園に来てくれた").unwrap();
        let far = e.embed("検査の結果が良かったと言われた").unwrap();
        assert!(cos(&base, &near) > cos(&base, &far));
        assert!((cos(&base, &base) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn embedding_extraction() {
        let v = json!({"data": [{"embedding": [0.5, -1.0]}]});
        assert_eq!(extract_embedding(&v), Some(vec![0.5, -1.0]));
        assert_eq!(extract_embedding(&json!({"embedding": [1]})), Some(vec![1.0]));
        assert_eq!(extract_embedding(&json!({"embedding": ["x"]})), None);
    }
}
