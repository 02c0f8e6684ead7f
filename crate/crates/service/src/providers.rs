//! Builds an [`Engine`] for one of the three run modes.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use metablend::clock::{Clock, SystemClock};
use metablend::engine::{Engine, EngineParts};
use metablend::expression::LexiconTagger;
use metablend::http::{ReqwestTransport, Transport};
use metablend::knowledge::{KnowledgeClient, TermCache};
use metablend::oracle::{CompletionOptions, HttpChat, HttpImages, ImageStore, Oracle, RecordingChat};
use metablend::scoring::{
    Embedder, HttpEmbedder, HttpSentiment, LexiconSentiment, RecordingEmbeddings, SentimentProvider,
};

use crate::config::Config;
use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mode {
    /// Hosted providers, knowledge lookups cached under the cache dir.
    Live,
    /// Fixture playback; no network.
    Offline { fixtures: PathBuf },
    /// Hosted providers, every exchange written to `fixtures`.
    Record { fixtures: PathBuf },
}

/// Default fixture directory for an expression: `fixtures/<slug>`.
pub fn default_fixtures(expression: &str) -> PathBuf {
    Path::new("fixtures").join(slug(expression))
}

/// Lowercase alphanumeric words joined by `-`.
pub fn slug(text: &str) -> String {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("-")
}

fn config_error(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(
        axum::http::StatusCode::INTERNAL_SERVER_ERROR,
        "ConfigError",
        e.to_string(),
    )
}

pub fn build_engine(cfg: &Config, mode: &Mode) -> Result<Engine, ApiError> {
    let options = CompletionOptions {
        temperature: cfg.temperature,
        max_attempts: cfg.max_attempts,
    };
    let engine = match mode {
        Mode::Offline { fixtures } => {
            if !fixtures.is_dir() {
                return Err(config_error(format!(
                    "fixture directory {} not found",
                    fixtures.display()
                )));
            }
            let mut parts = EngineParts::offline(fixtures, &cfg.data_dir)?;
            parts.oracle = parts.oracle.with_defaults(options);
            Engine::new(parts)
        }
        Mode::Live | Mode::Record { .. } => {
            let transport: Arc<dyn Transport> =
                Arc::new(ReqwestTransport::new(Duration::from_secs(cfg.request_timeout_secs)).map_err(config_error)?);
            let clock: Arc<dyn Clock> = Arc::new(SystemClock);
            let chat = HttpChat::new(
                transport.clone(),
                &cfg.oracle.base_url,
                cfg.oracle.api_key.clone(),
                &cfg.oracle.model,
            );
            let images = HttpImages::new(
                transport.clone(),
                &cfg.images.base_url,
                cfg.images.api_key.clone(),
                &cfg.images.model,
            );
            let embeddings = HttpEmbedder::new(
                transport.clone(),
                &cfg.embeddings.base_url,
                cfg.embeddings.api_key.clone(),
                &cfg.embeddings.model,
            );
            let knowledge = KnowledgeClient::live(&cfg.knowledge_base_url, transport.clone()).with_clock(clock.clone());
            let store = ImageStore::new(&cfg.data_dir);
            let (chat, knowledge, embedder): (Arc<dyn metablend::oracle::ChatProvider>, _, _) = match mode {
                Mode::Record { fixtures } => (
                    Arc::new(RecordingChat::new(chat, fixtures.join("oracle"))),
                    knowledge.with_cache(TermCache::new(fixtures.join("knowledge"))),
                    Embedder::new(Arc::new(RecordingEmbeddings::new(
                        embeddings,
                        fixtures.join("embeddings.json"),
                    ))),
                ),
                _ => (
                    Arc::new(chat),
                    knowledge.with_cache(TermCache::new(cfg.cache_dir.join("knowledge"))),
                    Embedder::new(Arc::new(embeddings)),
                ),
            };
            // Playback always scores sentiment with the lexicon, so recording
            // does too.
            let sentiment: Arc<dyn SentimentProvider> = match (&cfg.sentiment_url, mode) {
                (Some(url), Mode::Live) => Arc::new(HttpSentiment::new(
                    transport.clone(),
                    url,
                    cfg.sentiment_api_key.clone(),
                )),
                _ => Arc::new(LexiconSentiment::bundled()),
            };
            let oracle = Oracle::new(chat, Arc::new(images), store)
                .with_defaults(options)
                .with_in_flight_limit(cfg.max_in_flight)
                .with_clock(clock.clone());
            Engine::new(EngineParts {
                tagger: Arc::new(LexiconTagger),
                knowledge,
                oracle,
                embedder,
                sentiment,
                clock,
            })
        }
    };
    Ok(engine.with_scheme_count(cfg.schemes))
}
