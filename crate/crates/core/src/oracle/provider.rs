//! Completion and image providers: live HTTP, fixture playback, recording.

use std::collections::HashMap;
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use base64::Engine as _;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::template::{Bindings, TemplateId};
use crate::http::Transport;

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub template: TemplateId,
    pub bindings: Bindings,
    /// Fully rendered prompt text.
    pub prompt: String,
    pub temperature: f64,
    /// 1-based attempt number.
    pub attempt: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    /// Transient; worth retrying.
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    /// Permanent for this request (bad credentials, missing fixture).
    #[error("provider failure: {0}")]
    Fatal(String),
    /// Content policy refusal.
    #[error("request refused by provider: {0}")]
    Refused(String),
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedImage {
    pub bytes: Vec<u8>,
    /// Stable identifier when the provider is deterministic.
    pub stable_id: Option<String>,
}

pub trait ImageProvider: Send + Sync {
    fn generate(&self, prompt: &str) -> Result<GeneratedImage, ProviderError>;
}

/// Adapts a closure into a [`ChatProvider`]; handy for tests and scripted
/// fixture authoring.
pub struct FnChat<F>(pub F);

impl<F> FnChat<F>
where
    F: Fn(&ChatRequest) -> Result<String, ProviderError> + Send + Sync,
{
    pub fn new(f: F) -> Self {
        FnChat(f)
    }
}

impl<F> ChatProvider for FnChat<F>
where
    F: Fn(&ChatRequest) -> Result<String, ProviderError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        (self.0)(request)
    }
}

fn classify_status(status: u16, body: &str) -> ProviderError {
    match status {
        400 if body.contains("content_policy") || body.contains("safety") => ProviderError::Refused(body.to_string()),
        401 | 403 | 404 | 400 | 422 => ProviderError::Fatal(format!("HTTP {status}: {body}")),
        _ => ProviderError::Unavailable(format!("HTTP {status}: {body}")),
    }
}

/// Chat-completions style endpoint (`POST {base}/chat/completions`).
pub struct HttpChat {
    transport: Arc<dyn Transport>,
    base_url: String,
    api_key: Option<String>,
    model: String,
}

impl HttpChat {
    pub fn new(transport: Arc<dyn Transport>, base_url: &str, api_key: Option<String>, model: &str) -> Self {
        HttpChat {
            transport,
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            model: model.to_string(),
        }
    }
}

impl ChatProvider for HttpChat {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
        });
        let auth = self.api_key.as_ref().map(|k| format!("Bearer {k}"));
        let headers: Vec<(&str, &str)> = auth.iter().map(|a| ("Authorization", a.as_str())).collect();
        let resp = self
            .transport
            .post_json(&format!("{}/chat/completions", self.base_url), &headers, &body)
            .map_err(|e| ProviderError::Unavailable(e.to_string()))?;
        if !resp.is_success() {
            return Err(classify_status(resp.status, &resp.text()));
        }
        let value: Value = serde_json::from_slice(&resp.body).map_err(|e| ProviderError::Unavailable(e.to_string()))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Unavailable("response has no choices[0].message.content".into()))
    }
}

/// Image-generation endpoint (`POST {base}/images/generations`) returning
/// base64 payloads.
pub struct HttpImages {
    transport: Arc<dyn Transport>,
    base_url: String,
    api_key: Option<String>,
    model: String,
    size: String,
}

impl HttpImages {
    pub fn new(transport: Arc<dyn Transport>, base_url: &str, api_key: Option<String>, model: &str) -> Self {
        HttpImages {
            transport,
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            model: model.to_string(),
            size: "1024x1024".into(),
        }
    }
}

impl ImageProvider for HttpImages {
    fn generate(&self, prompt: &str) -> Result<GeneratedImage, ProviderError> {
        let body = json!({
            "model": self.model,
            "prompt": prompt,
            "n": 1,
            "size": self.size,
            "response_format": "b64_json",
        });
        let auth = self.api_key.as_ref().map(|k| format!("Bearer {k}"));
        let headers: Vec<(&str, &str)> = auth.iter().map(|a| ("Authorization", a.as_str())).collect();
        let resp = self
            .transport
            .post_json(&format!("{}/images/generations", self.base_url), &headers, &body)
            .map_err(|e| ProviderError::Unavailable(e.to_string()))?;
        if !resp.is_success() {
            return Err(classify_status(resp.status, &resp.text()));
        }
        let value: Value = serde_json::from_slice(&resp.body).map_err(|e| ProviderError::Unavailable(e.to_string()))?;
        let b64 = value
            .pointer("/data/0/b64_json")
            .and_then(Value::as_str)
            .ok_or_else(|| ProviderError::Unavailable("response has no data[0].b64_json".into()))?;
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(b64)
            .map_err(|e| ProviderError::Unavailable(format!("bad base64 image: {e}")))?;
        Ok(GeneratedImage { bytes, stable_id: None })
    }
}

/// Recorded exchange for one `(template, bindings)` request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub template: TemplateId,
    pub bindings: Bindings,
    /// Rendered prompt as sent.
    pub request: String,
    /// Raw completions; attempt `k` replays entry `min(k, len) - 1`.
    pub responses: Vec<String>,
    /// Parsed payload of the last response, when it parsed.
    #[serde(default)]
    pub parsed: Option<Value>,
}

/// `"{template}-{hash of bindings}"`.
pub fn fixture_key(template: TemplateId, bindings: &Bindings) -> String {
    let canonical = serde_json::to_string(bindings).expect("string map serializes");
    format!("{}-{}", template, &crate::sha256_hex(canonical.as_bytes())[..16])
}

/// Replays recorded completions. Records are indexed by the key computed
/// from their contents, so file names are informational.
pub struct FixtureChat {
    records: HashMap<String, FixtureRecord>,
    dir: PathBuf,
}

impl FixtureChat {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ProviderError> {
        let dir = dir.into();
        let mut records = HashMap::new();
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Ok(FixtureChat { records, dir });
            }
            Err(e) => return Err(ProviderError::Fatal(format!("{}: {e}", dir.display()))),
        };
        for entry in entries {
            let path = entry.map_err(|e| ProviderError::Fatal(e.to_string()))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let bytes = fs::read(&path).map_err(|e| ProviderError::Fatal(format!("{}: {e}", path.display())))?;
            let record: FixtureRecord =
                serde_json::from_slice(&bytes).map_err(|e| ProviderError::Fatal(format!("{}: {e}", path.display())))?;
            records.insert(fixture_key(record.template, &record.bindings), record);
        }
        Ok(FixtureChat { records, dir })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl ChatProvider for FixtureChat {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let key = fixture_key(request.template, &request.bindings);
        let record = self.records.get(&key).ok_or_else(|| {
            ProviderError::Fatal(format!(
                "no fixture {key} in {} for bindings {}",
                self.dir.display(),
                serde_json::to_string(&request.bindings).unwrap_or_default()
            ))
        })?;
        let idx = (request.attempt.max(1) as usize).min(record.responses.len());
        record
            .responses
            .get(idx.wrapping_sub(1))
            .cloned()
            .ok_or_else(|| ProviderError::Fatal(format!("fixture {key} has no responses")))
    }
}

/// Wraps a live provider and writes every exchange as a fixture record.
pub struct RecordingChat<P> {
    inner: P,
    dir: PathBuf,
    writes: Mutex<HashMap<String, Vec<String>>>,
}

impl<P: ChatProvider> RecordingChat<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> Self {
        RecordingChat {
            inner,
            dir: dir.into(),
            writes: Mutex::new(HashMap::new()),
        }
    }

    fn write(&self, request: &ChatRequest, response: &str) -> Result<(), ProviderError> {
        let key = fixture_key(request.template, &request.bindings);
        // One lock covers the whole read-modify-write for a key.
        let mut writes = self.writes.lock();
        let responses = writes.entry(key.clone()).or_default();
        if request.attempt <= 1 {
            responses.clear();
        }
        responses.push(response.to_string());
        let parsed = super::extract::extract_json_result(response, request.template)
            .ok()
            .and_then(|r| serde_json::to_value(r).ok());
        let record = FixtureRecord {
            template: request.template,
            bindings: request.bindings.clone(),
            request: request.prompt.clone(),
            responses: responses.clone(),
            parsed,
        };
        let mut bytes = serde_json::to_vec_pretty(&record).map_err(|e| ProviderError::Fatal(e.to_string()))?;
        bytes.push(b'\n');
        crate::write_atomic(&self.dir.join(format!("{key}.json")), &bytes)
            .map_err(|e| ProviderError::Fatal(e.to_string()))
    }
}

impl<P: ChatProvider> ChatProvider for RecordingChat<P> {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let response = self.inner.complete(request)?;
        self.write(request, &response)?;
        Ok(response)
    }
}

/// Deterministic stand-in images: a small solid PNG whose color and id come
/// from the prompt hash.
#[derive(Debug, Default, Clone)]
pub struct PlaceholderImages;

impl PlaceholderImages {
    pub fn id_for(prompt: &str) -> String {
        crate::sha256_hex(prompt.as_bytes())[..24].to_string()
    }
}

impl ImageProvider for PlaceholderImages {
    fn generate(&self, prompt: &str) -> Result<GeneratedImage, ProviderError> {
        let digest = crate::sha256_hex(prompt.as_bytes());
        let rgb = hex::decode(&digest[..6]).expect("hex digest");
        let img = image::RgbImage::from_pixel(64, 64, image::Rgb([rgb[0], rgb[1], rgb[2]]));
        let mut bytes = Vec::new();
        img.write_to(&mut Cursor::new(&mut bytes), image::ImageFormat::Png)
            .map_err(|e| ProviderError::Fatal(e.to_string()))?;
        Ok(GeneratedImage {
            bytes,
            stable_id: Some(Self::id_for(prompt)),
        })
    }
}

pub fn read_fixture_record(path: &Path) -> Result<FixtureRecord, ProviderError> {
    let bytes = fs::read(path).map_err(|e| ProviderError::Fatal(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| ProviderError::Fatal(format!("{}: {e}", path.display())))
}
