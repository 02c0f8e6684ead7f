use thiserror::Error;

use crate::blend::BlendError;
use crate::expression::ExpressionError;
use crate::knowledge::KnowledgeError;
use crate::mapping::MappingError;
use crate::oracle::OracleError;
use crate::scoring::ScoringError;
use crate::studio::StudioError;

/// Any pipeline failure.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Expression(#[from] ExpressionError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Blend(#[from] BlendError),
    #[error(transparent)]
    Studio(#[from] StudioError),
}

/// Coarse failure class, used for HTTP status mapping and exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    NotFound,
    Conflict,
    Provider,
    Internal,
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Expression(e) => match e {
                ExpressionError::EmptyExpression => "EmptyExpression",
                ExpressionError::TaggerUnavailable(_) => "TaggerUnavailable",
                ExpressionError::IndexOutOfRange { .. } => "IndexOutOfRange",
            },
            Error::Knowledge(e) => match e {
                KnowledgeError::EmptySeed | KnowledgeError::InvalidLimit(_) => "InvalidQuery",
                KnowledgeError::KnowledgeUnavailable(_) => "KnowledgeUnavailable",
                KnowledgeError::RateLimited { .. } => "RateLimited",
                KnowledgeError::FixtureMissing(_) => "FixtureMissing",
                KnowledgeError::Cache(_) => "CacheError",
            },
            Error::Oracle(e) => oracle_code(e),
            Error::Mapping(e) => match e {
                MappingError::EmptyExpression => "EmptyExpression",
                MappingError::ConceptNotSelected(_) => "ConceptNotSelected",
                MappingError::EmptyCandidates => "EmptyCandidates",
                MappingError::CandidateValidationFailed { .. } => "CandidateValidationFailed",
                MappingError::AttributeValidationFailed { .. } => "AttributeValidationFailed",
                MappingError::Oracle(e) => oracle_code(e),
                MappingError::Knowledge(e) => Error::Knowledge(e.clone()).code(),
            },
            Error::Scoring(e) => match e {
                ScoringError::EmptyText => "EmptyText",
                ScoringError::EmbeddingUnavailable(_) => "EmbeddingUnavailable",
                ScoringError::DimensionMismatch { .. } => "DimensionMismatch",
                ScoringError::ZeroVector => "ZeroVector",
                ScoringError::ProviderMismatch(..) => "ProviderMismatch",
                ScoringError::SentimentUnavailable(_) => "SentimentUnavailable",
                ScoringError::InvalidConfidence(_) => "InvalidConfidence",
                ScoringError::EmptyItems => "EmptyItems",
            },
            Error::Blend(e) => match e {
                BlendError::InvalidPair(_) => "InvalidPair",
                BlendError::InvalidSchemeCount(_) => "InvalidSchemeCount",
                BlendError::EmptyScheme => "EmptyScheme",
                BlendError::InsufficientConcepts(_) => "InsufficientConcepts",
                BlendError::DuplicateConcept(_) => "DuplicateConcept",
                BlendError::PairNotScored(..) => "PairNotScored",
                BlendError::Oracle(e) => oracle_code(e),
            },
            Error::Studio(e) => e.code(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.code() {
            "UnknownPrompt" | "UnknownObject" | "UnknownConcept" | "UnknownScheme" => ErrorClass::NotFound,
            "NoConceptsSelected" | "ConceptNotSelected" | "MissingDiagram" | "StalePrompt" | "PairNotScored"
            | "NoCandidates" | "MissingTheme" | "NoSchemes" | "DuplicateObject" => ErrorClass::Conflict,
            "KnowledgeUnavailable"
            | "RateLimited"
            | "FixtureMissing"
            | "OracleUnavailable"
            | "InvalidOracleResponse"
            | "ParseFailure"
            | "SchemaMismatch"
            | "ImageProviderUnavailable"
            | "ContentRejected"
            | "EmbeddingUnavailable"
            | "SentimentUnavailable"
            | "CandidateValidationFailed"
            | "AttributeValidationFailed"
            | "TaggerUnavailable"
            | "DimensionMismatch"
            | "ProviderMismatch" => ErrorClass::Provider,
            "CacheError" | "ImageStoreError" | "IoError" | "Inconsistent" => ErrorClass::Internal,
            _ => ErrorClass::Validation,
        }
    }

    /// Provider-side detail worth surfacing separately from the message.
    pub fn provider_detail(&self) -> Option<String> {
        let oracle = match self {
            Error::Oracle(e) | Error::Mapping(MappingError::Oracle(e)) | Error::Blend(BlendError::Oracle(e)) => e,
            _ => return None,
        };
        match oracle {
            OracleError::InvalidOracleResponse { last_raw, .. } if !last_raw.is_empty() => Some(last_raw.clone()),
            OracleError::OracleUnavailable(d)
            | OracleError::ImageProviderUnavailable(d)
            | OracleError::ContentRejected(d) => Some(d.clone()),
            _ => None,
        }
    }
}

fn oracle_code(e: &OracleError) -> &'static str {
    match e {
        OracleError::MissingBinding(_) => "MissingBinding",
        OracleError::UnknownTemplate(_) => "UnknownTemplate",
        OracleError::OracleUnavailable(_) => "OracleUnavailable",
        OracleError::InvalidOracleResponse { .. } => "InvalidOracleResponse",
        OracleError::ParseFailure(_) => "ParseFailure",
        OracleError::SchemaMismatch(_) => "SchemaMismatch",
        OracleError::EmptyPrompt => "EmptyPrompt",
        OracleError::ImageProviderUnavailable(_) => "ImageProviderUnavailable",
        OracleError::ContentRejected(_) => "ContentRejected",
        OracleError::Store(_) => "ImageStoreError",
    }
}
