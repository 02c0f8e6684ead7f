use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{math, ScoringError};
use crate::http::Transport;
use crate::knowledge::normalize_term;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub provider_tag: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, provider_tag: impl Into<String>) -> Result<Self, ScoringError> {
        if values.is_empty() {
            return Err(ScoringError::EmbeddingUnavailable("empty vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ScoringError::EmbeddingUnavailable("non-finite vector entry".into()));
        }
        Ok(EmbeddingVector {
            values,
            provider_tag: provider_tag.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Cosine similarity of two embeddings from the same provider.
pub fn cosine_similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, ScoringError> {
    if u.provider_tag != v.provider_tag {
        return Err(ScoringError::ProviderMismatch(
            u.provider_tag.clone(),
            v.provider_tag.clone(),
        ));
    }
    math::cosine(&u.values, &v.values)
}

pub trait EmbeddingProvider: Send + Sync {
    /// Provider/model tag; vectors with different tags are not comparable.
    fn tag(&self) -> &str;
    fn embed(&self, text: &str) -> Result<Vec<f64>, ScoringError>;
}

/// Caching front for an [`EmbeddingProvider`] that also pins the vector
/// dimension on first use.
pub struct Embedder {
    provider: Arc<dyn EmbeddingProvider>,
    cache: RwLock<HashMap<(String, String), EmbeddingVector>>,
    dim: RwLock<Option<usize>>,
}

impl Embedder {
    pub fn new(provider: Arc<dyn EmbeddingProvider>) -> Self {
        Embedder {
            provider,
            cache: RwLock::new(HashMap::new()),
            dim: RwLock::new(None),
        }
    }

    /// Requires every vector to have `dim` entries.
    pub fn with_dim(self, dim: usize) -> Self {
        *self.dim.write() = Some(dim);
        self
    }

    pub fn provider_tag(&self) -> &str {
        self.provider.tag()
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, ScoringError> {
        let norm = normalize_term(text);
        if norm.is_empty() {
            return Err(ScoringError::EmptyText);
        }
        let key = (self.provider.tag().to_string(), norm);
        if let Some(v) = self.cache.read().get(&key) {
            return Ok(v.clone());
        }
        let vector = EmbeddingVector::new(self.provider.embed(&key.1)?, self.provider.tag())?;
        {
            let mut dim = self.dim.write();
            match *dim {
                Some(d) if d != vector.dim() => {
                    return Err(ScoringError::DimensionMismatch {
                        expected: d,
                        found: vector.dim(),
                    })
                }
                Some(_) => {}
                None => *dim = Some(vector.dim()),
            }
        }
        self.cache.write().entry(key).or_insert(vector.clone());
        Ok(vector)
    }

    pub fn similarity(&self, a: &str, b: &str) -> Result<f64, ScoringError> {
        cosine_similarity(&self.embed(a)?, &self.embed(b)?)
    }
}

/// Embedding table file: `{"provider_tag", "dim", "vectors": {text: [...]}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub provider_tag: String,
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn load(path: &Path) -> Result<Self, ScoringError> {
        let bytes =
            std::fs::read(path).map_err(|e| ScoringError::EmbeddingUnavailable(format!("{}: {e}", path.display())))?;
        let table: EmbeddingTable = serde_json::from_slice(&bytes)
            .map_err(|e| ScoringError::EmbeddingUnavailable(format!("{}: {e}", path.display())))?;
        if let Some((text, v)) = table.vectors.iter().find(|(_, v)| v.len() != table.dim) {
            return Err(ScoringError::EmbeddingUnavailable(format!(
                "{}: vector for '{text}' has {} entries, table says {}",
                path.display(),
                v.len(),
                table.dim
            )));
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<(), ScoringError> {
        let mut bytes =
            serde_json::to_vec_pretty(self).map_err(|e| ScoringError::EmbeddingUnavailable(e.to_string()))?;
        bytes.push(b'\n');
        crate::write_atomic(path, &bytes).map_err(|e| ScoringError::EmbeddingUnavailable(e.to_string()))
    }
}

/// Offline provider backed by an [`EmbeddingTable`]. Unknown text is an
/// error, never a made-up vector.
pub struct FixtureEmbeddings {
    table: EmbeddingTable,
}

impl FixtureEmbeddings {
    pub fn open(path: &Path) -> Result<Self, ScoringError> {
        Ok(FixtureEmbeddings {
            table: EmbeddingTable::load(path)?,
        })
    }

    pub fn from_table(table: EmbeddingTable) -> Self {
        FixtureEmbeddings { table }
    }
}

impl EmbeddingProvider for FixtureEmbeddings {
    fn tag(&self) -> &str {
        &self.table.provider_tag
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ScoringError> {
        self.table
            .vectors
            .get(&normalize_term(text))
            .cloned()
            .ok_or_else(|| ScoringError::EmbeddingUnavailable(format!("no fixture vector for '{text}'")))
    }
}

/// Deterministic feature-hashing embedding over character trigrams. Needs
/// no model; similar spellings land close together, meaning does not.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    tag: String,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        let dim = dim.max(8);
        HashingEmbedder {
            dim,
            tag: format!("hashing-trigram-{dim}"),
        }
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ScoringError> {
        let padded: Vec<char> = format!("  {}  ", normalize_term(text)).chars().collect();
        let mut v = vec![0.0; self.dim];
        for w in padded.windows(3) {
            let gram: String = w.iter().collect();
            let digest = crate::sha256_hex(gram.as_bytes());
            let h = u64::from_str_radix(&digest[..16], 16).expect("hex");
            let bucket = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
        if v.iter().all(|x| *x == 0.0) {
            v[0] = 1.0;
        }
        Ok(v)
    }
}

/// `POST {base}/embeddings` with `{"model", "input"}`, reading
/// `data[0].embedding`.
pub struct HttpEmbedder {
    transport: Arc<dyn Transport>,
    base_url: String,
    api_key: Option<String>,
    model: String,
    tag: String,
}

impl HttpEmbedder {
    pub fn new(transport: Arc<dyn Transport>, base_url: &str, api_key: Option<String>, model: &str) -> Self {
        HttpEmbedder {
            transport,
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            model: model.to_string(),
            tag: model.to_string(),
        }
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ScoringError> {
        let auth = self.api_key.as_ref().map(|k| format!("Bearer {k}"));
        let headers: Vec<(&str, &str)> = auth.iter().map(|a| ("Authorization", a.as_str())).collect();
        let body = json!({"model": self.model, "input": text});
        let resp = self
            .transport
            .post_json(&format!("{}/embeddings", self.base_url), &headers, &body)
            .map_err(|e| ScoringError::EmbeddingUnavailable(e.to_string()))?;
        if !resp.is_success() {
            return Err(ScoringError::EmbeddingUnavailable(format!("HTTP {}", resp.status)));
        }
        let value: Value =
            serde_json::from_slice(&resp.body).map_err(|e| ScoringError::EmbeddingUnavailable(e.to_string()))?;
        value
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_f64).collect::<Vec<_>>())
            .filter(|v| !v.is_empty())
            .ok_or_else(|| ScoringError::EmbeddingUnavailable("response has no data[0].embedding".into()))
    }
}

/// Wraps a provider and appends every vector it returns to a table file.
pub struct RecordingEmbeddings<P> {
    inner: P,
    path: PathBuf,
    table: Mutex<Option<EmbeddingTable>>,
}

impl<P: EmbeddingProvider> RecordingEmbeddings<P> {
    pub fn new(inner: P, path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        let existing = EmbeddingTable::load(&path)
            .ok()
            .filter(|t| t.provider_tag == inner.tag());
        RecordingEmbeddings {
            inner,
            path,
            table: Mutex::new(existing),
        }
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for RecordingEmbeddings<P> {
    fn tag(&self) -> &str {
        self.inner.tag()
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ScoringError> {
        let v = self.inner.embed(text)?;
        let mut guard = self.table.lock();
        let table = guard.get_or_insert_with(|| EmbeddingTable {
            provider_tag: self.inner.tag().to_string(),
            dim: v.len(),
            vectors: BTreeMap::new(),
        });
        table.vectors.insert(normalize_term(text), v.clone());
        table.save(&self.path)?;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_cached() {
        let e = Embedder::new(Arc::new(HashingEmbedder::new(64)));
        let a = e.embed("orange").unwrap();
        let b = e.embed("Orange").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), 64);
        assert_eq!(e.embed(""), Err(ScoringError::EmptyText));
    }

    #[test]
    fn dimension_is_pinned() {
        let e = Embedder::new(Arc::new(HashingEmbedder::new(32))).with_dim(16);
        assert_eq!(
            e.embed("orange"),
            Err(ScoringError::DimensionMismatch {
                expected: 16,
                found: 32
            })
        );
    }

    #[test]
    fn fixture_miss_is_error() {
        let table = EmbeddingTable {
            provider_tag: "t".into(),
            dim: 2,
            vectors: [("earth".to_string(), vec![1.0, 0.0])].into_iter().collect(),
        };
        let e = Embedder::new(Arc::new(FixtureEmbeddings::from_table(table)));
        assert!(e.embed("earth").is_ok());
        assert!(matches!(e.embed("moon"), Err(ScoringError::EmbeddingUnavailable(_))));
    }

    #[test]
    fn tags_must_match() {
        let u = EmbeddingVector::new(vec![1.0, 0.0], "a").unwrap();
        let v = EmbeddingVector::new(vec![1.0, 0.0], "b").unwrap();
        assert!(matches!(
            cosine_similarity(&u, &v),
            Err(ScoringError::ProviderMismatch(..))
        ));
    }

    #[test]
    fn recording_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("embeddings.json");
        let rec = RecordingEmbeddings::new(HashingEmbedder::new(16), &path);
        let live = rec.embed("fireplace").unwrap();
        let replay = FixtureEmbeddings::open(&path).unwrap();
        assert_eq!(replay.embed("fireplace").unwrap(), live);
        assert_eq!(replay.tag(), "hashing-trigram-16");
    }
}
