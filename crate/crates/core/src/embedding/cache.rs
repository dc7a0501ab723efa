use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{text_hash, EmbeddingError, EmbeddingProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheMode {
    /// Misses are computed by the inner provider and stored.
    ReadWrite,
    /// Misses are errors; the inner provider is never called.
    ReplayOnly,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheManifest {
    provider_id: String,
    dim: usize,
    rows: Vec<CacheRow>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRow {
    text_hash: String,
    row: usize,
}

/// Persistent embedding cache keyed by (provider id, text hash).
///
/// On disk: `<provider>.f64` holds little-endian rows of `dim` values and
/// `<provider>.manifest.json` maps text hashes to row indices.
pub struct CachedEmbedder<P> {
    inner: P,
    mode: CacheMode,
    entries: Mutex<BTreeMap<String, Vec<f64>>>,
}

fn file_stem(provider_id: &str) -> String {
    provider_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

impl<P: EmbeddingProvider> CachedEmbedder<P> {
    pub fn new(inner: P, mode: CacheMode) -> Self {
        Self {
            inner,
            mode,
            entries: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn paths(&self, dir: &Path) -> (PathBuf, PathBuf) {
        let stem = file_stem(self.inner.id());
        (dir.join(format!("{stem}.f64")), dir.join(format!("{stem}.manifest.json")))
    }

    /// Loads previously persisted rows for this provider, if any.
    pub fn load(&self, dir: impl AsRef<Path>) -> Result<usize, EmbeddingError> {
        let (matrix_path, manifest_path) = self.paths(dir.as_ref());
        if !manifest_path.exists() {
            return Ok(0);
        }
        let manifest: CacheManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)
            .map_err(|e| EmbeddingError::Cache(e.to_string()))?;
        if manifest.provider_id != self.inner.id() {
            return Err(EmbeddingError::Cache(format!(
                "cache belongs to provider {}, not {}",
                manifest.provider_id,
                self.inner.id()
            )));
        }
        if manifest.dim != self.inner.dim() {
            return Err(EmbeddingError::DimMismatch {
                expected: self.inner.dim(),
                got: manifest.dim,
            });
        }
        let bytes = fs::read(&matrix_path)?;
        let width = manifest.dim * 8;
        if bytes.len() != manifest.rows.len() * width {
            return Err(EmbeddingError::Cache(format!(
                "{} has {} bytes, expected {}",
                matrix_path.display(),
                bytes.len(),
                manifest.rows.len() * width
            )));
        }
        let mut entries = self.entries.lock().expect("cache lock");
        for r in &manifest.rows {
            let chunk = bytes
                .get(r.row * width..(r.row + 1) * width)
                .ok_or_else(|| EmbeddingError::Cache(format!("row {} out of bounds", r.row)))?;
            let v = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                .collect();
            entries.insert(r.text_hash.clone(), v);
        }
        Ok(manifest.rows.len())
    }

    /// Writes all cached rows, ordered by text hash.
    pub fn persist(&self, dir: impl AsRef<Path>) -> Result<(), EmbeddingError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let (matrix_path, manifest_path) = self.paths(dir);
        let entries = self.entries.lock().expect("cache lock");
        let mut bytes = Vec::with_capacity(entries.len() * self.inner.dim() * 8);
        let mut rows = Vec::with_capacity(entries.len());
        for (row, (hash, v)) in entries.iter().enumerate() {
            for x in v {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            rows.push(CacheRow {
                text_hash: hash.clone(),
                row,
            });
        }
        let manifest = CacheManifest {
            provider_id: self.inner.id().to_string(),
            dim: self.inner.dim(),
            rows,
        };
        fs::write(&matrix_path, bytes)?;
        fs::write(
            &manifest_path,
            serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
        )?;
        Ok(())
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedEmbedder<P> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        let key = text_hash(text);
        if let Some(v) = self.entries.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        if self.mode == CacheMode::ReplayOnly {
            return Err(EmbeddingError::CacheMiss(key));
        }
        let v = self.inner.embed(text)?;
        self.entries.lock().expect("cache lock").insert(key, v.clone());
        Ok(v)
    }
}
