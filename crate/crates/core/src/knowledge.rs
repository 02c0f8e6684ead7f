//! Related-term retrieval from a ConceptNet-compatible REST API.
//!
//! Objects come from the `related` endpoint, falling back to one-hop edge
//! queries over `RelatedTo`, `IsA` and `AtLocation` when the endpoint returns
//! fewer than half the requested terms. Attributes use the same path with the
//! edge fallback restricted to `HasProperty` and `RelatedTo`.
//!
//! Responses are cached on disk, one JSON record per query. In offline mode
//! the same record format is read from a fixtures directory and a miss is a
//! hard error.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::clock::{Clock, SystemClock};
use crate::http::{encode_segment, Transport};

pub const DEFAULT_LIMIT: usize = 50;
pub const MAX_LIMIT: usize = 100;
pub const CACHE_SCHEMA_VERSION: u32 = 1;

const OBJECT_RELATIONS: &[&str] = &["RelatedTo", "IsA", "AtLocation"];
const ATTRIBUTE_RELATIONS: &[&str] = &["HasProperty", "RelatedTo"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KnowledgeError {
    #[error("query seed is empty")]
    EmptySeed,
    #[error("limit {0} outside 1..={MAX_LIMIT}")]
    InvalidLimit(usize),
    #[error("knowledge base unavailable: {0}")]
    KnowledgeUnavailable(String),
    #[error("knowledge base rate limited (retry after {retry_after:?}s)")]
    RateLimited { retry_after: Option<u64> },
    #[error("no recorded fixture for {0}")]
    FixtureMissing(String),
    #[error("cache error: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelatedTerm {
    pub term: String,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Objects,
    Attributes,
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryKind::Objects => "objects",
            QueryKind::Attributes => "attributes",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KnowledgeQuery {
    pub seed: String,
    pub kind: QueryKind,
    pub limit: usize,
}

impl KnowledgeQuery {
    pub fn new(seed: &str, kind: QueryKind, limit: usize) -> Result<Self, KnowledgeError> {
        let seed = normalize_term(seed);
        if seed.is_empty() {
            return Err(KnowledgeError::EmptySeed);
        }
        if limit == 0 || limit > MAX_LIMIT {
            return Err(KnowledgeError::InvalidLimit(limit));
        }
        Ok(KnowledgeQuery { seed, kind, limit })
    }

    /// Content address of this query.
    pub fn cache_key(&self) -> String {
        let material = format!("v{CACHE_SCHEMA_VERSION}\n{}\n{}\n{}", self.seed, self.kind, self.limit);
        format!("{}-{}", self.kind, &crate::sha256_hex(material.as_bytes())[..32])
    }
}

impl fmt::Display for KnowledgeQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} '{}' (limit {})", self.kind, self.seed, self.limit)
    }
}

/// Lowercases, replaces underscores with spaces and collapses whitespace.
pub fn normalize_term(s: &str) -> String {
    s.replace('_', " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// One cached or recorded query result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub schema_version: u32,
    pub query: KnowledgeQuery,
    pub retrieved_at: String,
    pub terms: Vec<RelatedTerm>,
}

/// Directory of [`CacheRecord`] files.
#[derive(Debug, Clone)]
pub struct TermCache {
    dir: PathBuf,
}

impl TermCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        TermCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, query: &KnowledgeQuery) -> PathBuf {
        self.dir.join(format!("{}.json", query.cache_key()))
    }

    pub fn get(&self, query: &KnowledgeQuery) -> Result<Option<Vec<RelatedTerm>>, KnowledgeError> {
        let path = self.path(query);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(KnowledgeError::Cache(format!("{}: {e}", path.display()))),
        };
        let record: CacheRecord =
            serde_json::from_slice(&bytes).map_err(|e| KnowledgeError::Cache(format!("{}: {e}", path.display())))?;
        if record.schema_version != CACHE_SCHEMA_VERSION || &record.query != query {
            return Ok(None);
        }
        Ok(Some(record.terms))
    }

    pub fn put(
        &self,
        query: &KnowledgeQuery,
        terms: &[RelatedTerm],
        retrieved_at: String,
    ) -> Result<(), KnowledgeError> {
        let record = CacheRecord {
            schema_version: CACHE_SCHEMA_VERSION,
            query: query.clone(),
            retrieved_at,
            terms: terms.to_vec(),
        };
        let mut bytes = serde_json::to_vec_pretty(&record).map_err(|e| KnowledgeError::Cache(e.to_string()))?;
        bytes.push(b'\n');
        crate::write_atomic(&self.path(query), &bytes).map_err(|e| KnowledgeError::Cache(e.to_string()))
    }
}

enum Mode {
    Live {
        base_url: String,
        transport: Arc<dyn Transport>,
    },
    Offline {
        fixtures: TermCache,
    },
}

/// Knowledge-base client. Safe to share across threads.
pub struct KnowledgeClient {
    mode: Mode,
    cache: Option<TermCache>,
    clock: Arc<dyn Clock>,
    max_attempts: u32,
}

impl KnowledgeClient {
    pub fn live(base_url: impl Into<String>, transport: Arc<dyn Transport>) -> Self {
        KnowledgeClient {
            mode: Mode::Live {
                base_url: base_url.into().trim_end_matches('/').to_string(),
                transport,
            },
            cache: None,
            clock: Arc::new(SystemClock),
            max_attempts: 3,
        }
    }

    pub fn offline(fixtures: impl Into<PathBuf>) -> Self {
        KnowledgeClient {
            mode: Mode::Offline {
                fixtures: TermCache::new(fixtures),
            },
            cache: None,
            clock: Arc::new(SystemClock),
            max_attempts: 1,
        }
    }

    /// Adds an on-disk cache. In record mode this points at the fixtures
    /// directory.
    pub fn with_cache(mut self, cache: TermCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_max_attempts(mut self, attempts: u32) -> Self {
        self.max_attempts = attempts.max(1);
        self
    }

    pub fn is_offline(&self) -> bool {
        matches!(self.mode, Mode::Offline { .. })
    }

    pub fn related_objects(&self, concept: &str, limit: usize) -> Result<Vec<RelatedTerm>, KnowledgeError> {
        self.query(&KnowledgeQuery::new(concept, QueryKind::Objects, limit)?)
    }

    pub fn related_attributes(&self, object: &str, limit: usize) -> Result<Vec<RelatedTerm>, KnowledgeError> {
        self.query(&KnowledgeQuery::new(object, QueryKind::Attributes, limit)?)
    }

    pub fn query(&self, query: &KnowledgeQuery) -> Result<Vec<RelatedTerm>, KnowledgeError> {
        if let Some(cache) = &self.cache {
            if let Some(terms) = cache.get(query)? {
                return Ok(terms);
            }
        }
        let terms = match &self.mode {
            Mode::Offline { fixtures } => fixtures
                .get(query)?
                .ok_or_else(|| KnowledgeError::FixtureMissing(query.to_string()))?,
            Mode::Live { base_url, transport } => self.fetch(base_url, transport.as_ref(), query)?,
        };
        if let Some(cache) = &self.cache {
            cache.put(query, &terms, self.clock.now().to_rfc3339())?;
        }
        Ok(terms)
    }

    fn fetch(
        &self,
        base_url: &str,
        transport: &dyn Transport,
        query: &KnowledgeQuery,
    ) -> Result<Vec<RelatedTerm>, KnowledgeError> {
        let slug = encode_segment(&query.seed.replace(' ', "_"));
        let url = format!("{base_url}/related/c/en/{slug}?filter=/c/en&limit={}", query.limit);
        let body = self.get_json(transport, &url)?;
        let mut terms = parse_related(&body);
        if terms.len() * 2 < query.limit {
            let relations = match query.kind {
                QueryKind::Objects => OBJECT_RELATIONS,
                QueryKind::Attributes => ATTRIBUTE_RELATIONS,
            };
            for rel in relations {
                let url = format!("{base_url}/query?start=/c/en/{slug}&rel=/r/{rel}&limit={}", query.limit);
                let body = self.get_json(transport, &url)?;
                terms.extend(parse_edges(&body));
            }
        }
        Ok(rank_terms(terms, &query.seed, query.limit))
    }

    fn get_json(&self, transport: &dyn Transport, url: &str) -> Result<Value, KnowledgeError> {
        let mut last = String::new();
        for _ in 0..self.max_attempts {
            match transport.get(url, &[("Accept", "application/json")]) {
                Ok(resp) if resp.status == 429 => {
                    return Err(KnowledgeError::RateLimited {
                        retry_after: resp.retry_after,
                    })
                }
                Ok(resp) if resp.status == 404 => return Ok(Value::Null),
                Ok(resp) if resp.is_success() => {
                    return serde_json::from_slice(&resp.body)
                        .map_err(|e| KnowledgeError::KnowledgeUnavailable(format!("bad JSON from {url}: {e}")))
                }
                Ok(resp) => last = format!("HTTP {} from {url}", resp.status),
                Err(e) => last = e.to_string(),
            }
        }
        Err(KnowledgeError::KnowledgeUnavailable(last))
    }
}

/// English term from a ConceptNet node id like `/c/en/orange_juice/n`.
fn term_from_id(id: &str) -> Option<String> {
    let mut parts = id.split('/');
    match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some(""), Some("c"), Some("en"), Some(term)) if !term.is_empty() => Some(normalize_term(term)),
        _ => None,
    }
}

fn parse_related(body: &Value) -> Vec<RelatedTerm> {
    body.get("related")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
        .filter_map(|item| {
            let term = term_from_id(item.get("@id")?.as_str()?)?;
            let weight = item.get("weight").and_then(Value::as_f64).unwrap_or(0.0);
            Some(RelatedTerm {
                term,
                weight,
                relation: None,
            })
        })
        .collect()
}

fn parse_edges(body: &Value) -> Vec<RelatedTerm> {
    body.get("edges")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
        .filter_map(|edge| {
            let end = edge.get("end")?;
            if let Some(lang) = end.get("language").and_then(Value::as_str) {
                if lang != "en" {
                    return None;
                }
            }
            let term = term_from_id(end.get("@id")?.as_str()?)?;
            let weight = edge.get("weight").and_then(Value::as_f64).unwrap_or(0.0);
            let relation = edge
                .get("rel")
                .and_then(|r| r.get("label"))
                .and_then(Value::as_str)
                .map(str::to_string);
            Some(RelatedTerm { term, weight, relation })
        })
        .collect()
}

/// Dedups by normalized term (keeping the heaviest), drops the seed itself
/// and non-positive weights, sorts by descending weight then term, truncates.
pub fn rank_terms(terms: Vec<RelatedTerm>, seed: &str, limit: usize) -> Vec<RelatedTerm> {
    let seed = normalize_term(seed);
    let mut best: HashMap<String, RelatedTerm> = HashMap::new();
    for mut t in terms {
        t.term = normalize_term(&t.term);
        if t.term.is_empty() || t.term == seed || t.weight.is_nan() || t.weight <= 0.0 {
            continue;
        }
        match best.get(&t.term) {
            Some(existing) if existing.weight >= t.weight => {}
            _ => {
                best.insert(t.term.clone(), t);
            }
        }
    }
    let mut out: Vec<RelatedTerm> = best.into_values().collect();
    out.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.term.cmp(&b.term)));
    out.truncate(limit);
    out
}
