//! Sessions, the exploration canvas, and the orchestrator that drives the
//! pipeline against a session.

mod session;
mod workflow;

use thiserror::Error;

pub use session::{
    pair_key, CanvasItem, Event, EventKind, HistoryEntry, SchemeSet, Session, Tombstone, SCHEMA_VERSION,
};
pub use workflow::{strongest_distinct_pair, AutoRun, ReplaceOutcome, Studio};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StudioError {
    #[error("unknown prompt {0}")]
    UnknownPrompt(String),
    #[error("'{name}' is not a candidate of '{concept}'")]
    UnknownObject { concept: String, name: String },
    #[error("unknown concept '{0}'")]
    UnknownConcept(String),
    #[error("scheme index {index} out of range ({available} schemes)")]
    UnknownScheme { index: usize, available: usize },
    #[error("no concepts selected")]
    NoConceptsSelected,
    #[error("no object candidates yet")]
    NoCandidates,
    #[error("theme has not been inferred")]
    MissingTheme,
    #[error("no schemes generated for {0}")]
    NoSchemes(String),
    #[error("diagram missing: {0}")]
    MissingDiagram(String),
    #[error("prompt {0} involves a replaced object")]
    StalePrompt(String),
    #[error("'{0}' is already a candidate")]
    DuplicateObject(String),
    #[error("invalid object name: {0}")]
    InvalidObjectName(String),
    #[error("corrupt session file: {0}")]
    CorruptSessionFile(String),
    #[error("unsupported session schema version {0}")]
    UnsupportedSchemaVersion(u64),
    #[error("session is inconsistent: {0}")]
    Inconsistent(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl StudioError {
    pub fn code(&self) -> &'static str {
        match self {
            StudioError::UnknownPrompt(_) => "UnknownPrompt",
            StudioError::UnknownObject { .. } => "UnknownObject",
            StudioError::UnknownConcept(_) => "UnknownConcept",
            StudioError::UnknownScheme { .. } => "UnknownScheme",
            StudioError::NoConceptsSelected => "NoConceptsSelected",
            StudioError::NoCandidates => "NoCandidates",
            StudioError::MissingTheme => "MissingTheme",
            StudioError::NoSchemes(_) => "NoSchemes",
            StudioError::MissingDiagram(_) => "MissingDiagram",
            StudioError::StalePrompt(_) => "StalePrompt",
            StudioError::DuplicateObject(_) => "DuplicateObject",
            StudioError::InvalidObjectName(_) => "InvalidObjectName",
            StudioError::CorruptSessionFile(_) => "CorruptSessionFile",
            StudioError::UnsupportedSchemaVersion(_) => "UnsupportedSchemaVersion",
            StudioError::Inconsistent(_) => "Inconsistent",
            StudioError::Io(_) => "IoError",
        }
    }
}
