//! Provider wiring.
//!
//! An [`Engine`] bundles one instance of every provider the pipeline needs.
//! [`Engine::offline`] builds one from a fixture directory:
//!
//! ```text
//! <fixtures>/knowledge/*.json   recorded related-term lists
//! <fixtures>/oracle/*.json      recorded chat completions
//! <fixtures>/embeddings.json    embedding table
//! ```
//!
//! Images come from the deterministic placeholder provider and the clock is
//! frozen, so an offline engine makes no network calls and produces the same
//! bytes on every run.

use std::path::Path;
use std::sync::Arc;

use crate::blend::DEFAULT_SCHEME_COUNT;
use crate::clock::{Clock, FixedClock};
use crate::expression::{LexiconTagger, PosTagger};
use crate::knowledge::KnowledgeClient;
use crate::mapping::Mapper;
use crate::oracle::{FixtureChat, ImageStore, Oracle, OracleError, PlaceholderImages};
use crate::scoring::{Embedder, FixtureEmbeddings, LexiconSentiment, SentimentProvider};
use crate::Error;

pub struct Engine {
    pub tagger: Arc<dyn PosTagger>,
    pub knowledge: Arc<KnowledgeClient>,
    pub oracle: Arc<Oracle>,
    pub mapper: Mapper,
    pub embedder: Arc<Embedder>,
    pub sentiment: Arc<dyn SentimentProvider>,
    pub clock: Arc<dyn Clock>,
    pub scheme_count: usize,
}

/// Everything needed to build an [`Engine`].
pub struct EngineParts {
    pub tagger: Arc<dyn PosTagger>,
    pub knowledge: KnowledgeClient,
    pub oracle: Oracle,
    pub embedder: Embedder,
    pub sentiment: Arc<dyn SentimentProvider>,
    pub clock: Arc<dyn Clock>,
}

impl Engine {
    pub fn new(parts: EngineParts) -> Self {
        let knowledge = Arc::new(parts.knowledge);
        let oracle = Arc::new(parts.oracle);
        Engine {
            tagger: parts.tagger,
            mapper: Mapper::new(knowledge.clone(), oracle.clone()),
            knowledge,
            oracle,
            embedder: Arc::new(parts.embedder),
            sentiment: parts.sentiment,
            clock: parts.clock,
            scheme_count: DEFAULT_SCHEME_COUNT,
        }
    }

    pub fn with_scheme_count(mut self, n: usize) -> Self {
        self.scheme_count = n;
        self
    }

    /// Fixture playback engine writing images under `image_root`.
    pub fn offline(fixtures: &Path, image_root: &Path) -> Result<Self, Error> {
        Ok(Engine::new(EngineParts::offline(fixtures, image_root)?))
    }
}

impl EngineParts {
    /// Parts for [`Engine::offline`], open to adjustment before assembly.
    pub fn offline(fixtures: &Path, image_root: &Path) -> Result<Self, Error> {
        let clock: Arc<dyn Clock> = Arc::new(FixedClock::epoch());
        let chat =
            FixtureChat::open(fixtures.join("oracle")).map_err(|e| OracleError::OracleUnavailable(e.to_string()))?;
        let oracle = Oracle::new(Arc::new(chat), Arc::new(PlaceholderImages), ImageStore::new(image_root))
            .with_clock(clock.clone());
        let embeddings = FixtureEmbeddings::open(&fixtures.join("embeddings.json"))?;
        Ok(EngineParts {
            tagger: Arc::new(LexiconTagger),
            knowledge: KnowledgeClient::offline(fixtures.join("knowledge")).with_clock(clock.clone()),
            oracle,
            embedder: Embedder::new(Arc::new(embeddings)),
            sentiment: Arc::new(LexiconSentiment::bundled()),
            clock,
        })
    }
}
