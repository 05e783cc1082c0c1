//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown concept id {0}")]
    UnknownConcept(u64),

    #[error("unknown knowledge id {id} at site {site}")]
    UnknownKnowledge { site: usize, id: u64 },

    #[error("dangling integration link to site {site}, knowledge {knowledge_id}, cluster {cluster_id}")]
    DanglingLink {
        site: usize,
        knowledge_id: u64,
        cluster_id: u64,
    },

    #[error("integration link cycle through site {site}, knowledge {knowledge_id}, cluster {cluster_id}")]
    LinkCycle {
        site: usize,
        knowledge_id: u64,
        cluster_id: u64,
    },

    #[error("knowledge map is not running")]
    NotRunning,

    #[error("job validation failed: {0}")]
    InvalidJob(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable code, used by the CLI's structured error
    /// output and mirrored by the C API status codes.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Parse(_) => "parse",
            Error::UnknownConcept(_) => "unknown_concept",
            Error::UnknownKnowledge { .. } => "unknown_knowledge",
            Error::DanglingLink { .. } => "dangling_link",
            Error::LinkCycle { .. } => "link_cycle",
            Error::NotRunning => "not_running",
            Error::InvalidJob(_) => "invalid_job",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
