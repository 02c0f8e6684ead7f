use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use metablend::ErrorClass;
use serde::{Deserialize, Serialize};

/// Every code an [`ApiError`] can carry. `docs/api.md` lists the same set.
pub const CODES: &[&str] = &[
    // request shape
    "BadRequest",
    "EmptyExpression",
    "IndexOutOfRange",
    "InvalidQuery",
    "InvalidPair",
    "InvalidSchemeCount",
    "InvalidConfidence",
    "InvalidObjectName",
    "InsufficientConcepts",
    "DuplicateConcept",
    "EmptyScheme",
    "EmptyText",
    "EmptyItems",
    "EmptyCandidates",
    "EmptyPrompt",
    "ZeroVector",
    "MissingBinding",
    "UnknownTemplate",
    "CorruptSessionFile",
    "UnsupportedSchemaVersion",
    // unknown ids
    "UnknownSession",
    "UnknownPrompt",
    "UnknownObject",
    "UnknownConcept",
    "UnknownScheme",
    "UnknownArtifact",
    "UnknownJob",
    "UnknownEndpoint",
    // precondition conflicts
    "NoConceptsSelected",
    "ConceptNotSelected",
    "NoCandidates",
    "MissingTheme",
    "NoSchemes",
    "MissingDiagram",
    "StalePrompt",
    "PairNotScored",
    "DuplicateObject",
    "IterationMismatch",
    // providers
    "KnowledgeUnavailable",
    "RateLimited",
    "FixtureMissing",
    "OracleUnavailable",
    "InvalidOracleResponse",
    "ParseFailure",
    "SchemaMismatch",
    "ImageProviderUnavailable",
    "ContentRejected",
    "EmbeddingUnavailable",
    "SentimentUnavailable",
    "CandidateValidationFailed",
    "AttributeValidationFailed",
    "TaggerUnavailable",
    "DimensionMismatch",
    "ProviderMismatch",
    // internal
    "CacheError",
    "ImageStoreError",
    "IoError",
    "Inconsistent",
    "ConfigError",
    "Internal",
];

/// Error body returned by every endpoint and printed by the CLI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_detail: Option<String>,
    #[serde(skip)]
    pub status: u16,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        debug_assert!(CODES.contains(&code), "undocumented error code {code}");
        ApiError {
            code: code.to_string(),
            message: message.into(),
            provider_detail: None,
            status: status.as_u16(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UnknownSession", format!("no session {id}"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }

    pub fn status(&self) -> StatusCode {
        StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
    }

    /// Single-line JSON, as written to stderr by the CLI.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

pub fn status_for(class: ErrorClass) -> StatusCode {
    match class {
        ErrorClass::Validation => StatusCode::BAD_REQUEST,
        ErrorClass::NotFound => StatusCode::NOT_FOUND,
        ErrorClass::Conflict => StatusCode::CONFLICT,
        ErrorClass::Provider => StatusCode::BAD_GATEWAY,
        ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<metablend::Error> for ApiError {
    fn from(e: metablend::Error) -> Self {
        let mut api = ApiError::new(status_for(e.class()), e.code(), e.to_string());
        api.provider_detail = e.provider_detail();
        api
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}
