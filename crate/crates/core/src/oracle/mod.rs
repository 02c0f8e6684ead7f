//! Language-model and image-model access.
//!
//! [`Oracle`] renders one of the five prompt scripts, sends it to a
//! [`ChatProvider`], and extracts the JSON result the script asks for,
//! retrying with a lower temperature when the reply does not fit. Images go
//! through an [`ImageProvider`] and are written to an [`ImageStore`].

pub mod extract;
pub mod provider;
pub mod template;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_json_result, AttributeRow, OracleResult, ResultSchema, Suggestion};
pub use provider::{
    ChatProvider, ChatRequest, FixtureChat, FixtureRecord, FnChat, GeneratedImage, HttpChat, HttpImages, ImageProvider,
    PlaceholderImages, ProviderError, RecordingChat,
};
pub use template::{bindings, render_template, Bindings, PromptTemplate, TemplateId};

use crate::clock::{Clock, SystemClock};
use crate::limit::InFlightLimit;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("missing binding for placeholder {0}")]
    MissingBinding(String),
    #[error("unknown template '{0}'")]
    UnknownTemplate(String),
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error("no usable oracle response after {attempts} attempts: {detail}")]
    InvalidOracleResponse {
        attempts: u32,
        detail: String,
        last_raw: String,
    },
    #[error("could not parse oracle output: {0}")]
    ParseFailure(String),
    #[error("oracle output does not match the expected shape: {0}")]
    SchemaMismatch(String),
    #[error("image prompt is empty")]
    EmptyPrompt,
    #[error("image provider unavailable: {0}")]
    ImageProviderUnavailable(String),
    #[error("image request rejected: {0}")]
    ContentRejected(String),
    #[error("image store error: {0}")]
    Store(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionOptions {
    pub temperature: f64,
    pub max_attempts: u32,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        CompletionOptions {
            temperature: 0.7,
            max_attempts: 3,
        }
    }
}

impl CompletionOptions {
    /// Temperature for a 1-based attempt: linear steps from the configured
    /// value toward zero.
    pub fn temperature_for(&self, attempt: u32) -> f64 {
        let max = self.max_attempts.max(1) as f64;
        let k = (attempt.max(1) - 1) as f64;
        (self.temperature * (1.0 - k / max)).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResponse {
    pub text: String,
    pub parsed: Option<OracleResult>,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageArtifact {
    pub id: String,
    pub prompt: String,
    /// Path relative to the image store root.
    pub bytes_ref: String,
    pub created_at: DateTime<Utc>,
}

/// Directory holding generated image files.
#[derive(Debug, Clone)]
pub struct ImageStore {
    root: PathBuf,
}

impl ImageStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ImageStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn relative_path(id: &str) -> String {
        format!("images/{id}.png")
    }

    pub fn path_of(&self, artifact: &ImageArtifact) -> PathBuf {
        self.root.join(&artifact.bytes_ref)
    }

    /// Reads the bytes for an artifact id. Ids are hex, so anything else is
    /// treated as absent.
    pub fn read(&self, id: &str) -> Option<Vec<u8>> {
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric()) {
            return None;
        }
        std::fs::read(self.root.join(Self::relative_path(id))).ok()
    }

    fn write(&self, id: &str, bytes: &[u8]) -> Result<String, OracleError> {
        let rel = Self::relative_path(id);
        let path = self.root.join(&rel);
        if !path.exists() {
            crate::write_atomic(&path, bytes).map_err(|e| OracleError::Store(format!("{}: {e}", path.display())))?;
        }
        Ok(rel)
    }
}

pub struct Oracle {
    chat: Arc<dyn ChatProvider>,
    images: Arc<dyn ImageProvider>,
    store: ImageStore,
    limit: InFlightLimit,
    defaults: CompletionOptions,
    clock: Arc<dyn Clock>,
    image_attempts: u32,
    serial: AtomicU64,
}

impl Oracle {
    pub fn new(chat: Arc<dyn ChatProvider>, images: Arc<dyn ImageProvider>, store: ImageStore) -> Self {
        Oracle {
            chat,
            images,
            store,
            limit: InFlightLimit::new(4),
            defaults: CompletionOptions::default(),
            clock: Arc::new(SystemClock),
            image_attempts: 3,
            serial: AtomicU64::new(0),
        }
    }

    pub fn with_defaults(mut self, defaults: CompletionOptions) -> Self {
        self.defaults = defaults;
        self
    }

    pub fn with_in_flight_limit(mut self, max: usize) -> Self {
        self.limit = InFlightLimit::new(max);
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn defaults(&self) -> CompletionOptions {
        self.defaults
    }

    pub fn store(&self) -> &ImageStore {
        &self.store
    }

    /// Renders and completes `template`, returning the first schema-valid
    /// result.
    pub fn complete(
        &self,
        template: TemplateId,
        bindings: &Bindings,
        options: CompletionOptions,
    ) -> Result<OracleResponse, OracleError> {
        let schema = ResultSchema::for_template(template)
            .ok_or_else(|| OracleError::SchemaMismatch(format!("template {template} has no result block")))?;
        self.complete_checked(template, bindings, options, schema, &|_| Ok(()))
    }

    /// Like [`Oracle::complete`] with an explicit schema and an extra check.
    /// A reply that fails `check` counts as a failed attempt.
    pub fn complete_checked(
        &self,
        template: TemplateId,
        bindings: &Bindings,
        options: CompletionOptions,
        schema: ResultSchema,
        check: &dyn Fn(&OracleResult) -> Result<(), String>,
    ) -> Result<OracleResponse, OracleError> {
        let prompt = render_template(template, bindings)?;
        let max_attempts = options.max_attempts.max(1);
        let mut last_raw = String::new();
        let mut detail = String::from("no attempts made");
        for attempt in 1..=max_attempts {
            let request = ChatRequest {
                template,
                bindings: bindings.clone(),
                prompt: prompt.clone(),
                temperature: options.temperature_for(attempt),
                attempt,
            };
            let reply = {
                let _permit = self.limit.acquire();
                self.chat.complete(&request)
            };
            let text = match reply {
                Ok(text) => text,
                Err(ProviderError::Unavailable(e)) => {
                    detail = e;
                    if attempt == max_attempts {
                        return Err(OracleError::OracleUnavailable(detail));
                    }
                    continue;
                }
                Err(e) => return Err(OracleError::OracleUnavailable(e.to_string())),
            };
            match extract::extract_with_schema(&text, schema) {
                Ok(parsed) => match check(&parsed) {
                    Ok(()) => {
                        return Ok(OracleResponse {
                            text,
                            parsed: Some(parsed),
                            attempts: attempt,
                        })
                    }
                    Err(why) => detail = why,
                },
                Err(e) => detail = e.to_string(),
            }
            log::debug!("{template} attempt {attempt}/{max_attempts} rejected: {detail}");
            last_raw = text;
        }
        Err(OracleError::InvalidOracleResponse {
            attempts: max_attempts,
            detail,
            last_raw,
        })
    }

    /// Generates and stores one image for `prompt`.
    pub fn generate_image(&self, prompt: &str) -> Result<ImageArtifact, OracleError> {
        if prompt.trim().is_empty() {
            return Err(OracleError::EmptyPrompt);
        }
        let mut last = String::new();
        for _ in 0..self.image_attempts {
            let result = {
                let _permit = self.limit.acquire();
                self.images.generate(prompt)
            };
            match result {
                Ok(image) => {
                    let created_at = self.clock.now();
                    let id = image.stable_id.clone().unwrap_or_else(|| {
                        let n = self.serial.fetch_add(1, Ordering::Relaxed);
                        let salt = format!("{prompt}\n{}\n{n}\n{}", created_at.to_rfc3339(), std::process::id());
                        crate::sha256_hex(salt.as_bytes())[..24].to_string()
                    });
                    let bytes_ref = self.store.write(&id, &image.bytes)?;
                    return Ok(ImageArtifact {
                        id,
                        prompt: prompt.to_string(),
                        bytes_ref,
                        created_at,
                    });
                }
                Err(ProviderError::Refused(why)) => return Err(OracleError::ContentRejected(why)),
                Err(ProviderError::Fatal(why)) => return Err(OracleError::ImageProviderUnavailable(why)),
                Err(ProviderError::Unavailable(why)) => last = why,
            }
        }
        Err(OracleError::ImageProviderUnavailable(last))
    }
}
