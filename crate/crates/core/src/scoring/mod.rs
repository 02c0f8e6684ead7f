//! Similarity and sentiment scoring.

pub mod diagram;
pub mod embed;
pub mod math;
pub mod sentiment;

use thiserror::Error;

pub use diagram::{
    assemble_diagram, build_diagram, AnalysisDiagram, DiagramKind, Link, Node, PairScore, Palette, Side,
};
pub use embed::{
    cosine_similarity, Embedder, EmbeddingProvider, EmbeddingTable, EmbeddingVector, FixtureEmbeddings,
    HashingEmbedder, HttpEmbedder, RecordingEmbeddings,
};
pub use math::{minmax_normalize, quantile_normalize};
pub use sentiment::{
    pair_sentiment, sentiment, HttpSentiment, LexiconSentiment, SentimentLabel, SentimentProvider, SentimentScore,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("text is empty")]
    EmptyText,
    #[error("embedding unavailable: {0}")]
    EmbeddingUnavailable(String),
    #[error("vector dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot take the cosine of a zero vector")]
    ZeroVector,
    #[error("embeddings from different providers: {0} vs {1}")]
    ProviderMismatch(String, String),
    #[error("sentiment unavailable: {0}")]
    SentimentUnavailable(String),
    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),
    #[error("diagram needs at least one item on each side")]
    EmptyItems,
}
