//! Crate-wide error type. Each variant names the module that raised it so the
//! CLI can attribute failures.

use thiserror::Error;

use crate::agent::AgentError;
use crate::assessment::AssessmentError;
use crate::audit::AuditError;
use crate::corpus::CorpusError;
use crate::descriptor::DescriptorError;
use crate::embedding::EmbeddingError;
use crate::induction::InductionError;
use crate::metrics::MetricError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("embedding: {0}")]
    Embedding(#[from] EmbeddingError),
    #[error("topic induction: {0}")]
    Induction(#[from] InductionError),
    #[error("descriptor: {0}")]
    Descriptor(#[from] DescriptorError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricError),
    #[error("agent loop: {0}")]
    Agent(#[from] AgentError),
    #[error("audit: {0}")]
    Audit(#[from] AuditError),
    #[error("assessment: {0}")]
    Assessment(#[from] AssessmentError),
    #[error("config: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True when the failure is caused by bad user input (files, parameters)
    /// rather than by a fault while running the pipeline.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Corpus(_) | Error::Embedding(_) | Error::Config(_) | Error::Io { .. } => true,
            Error::Json(_) => true,
            Error::Assessment(e) => e.is_input_error(),
            Error::Audit(e) => e.is_input_error(),
            Error::Agent(e) => e.is_input_error(),
            Error::Induction(_) | Error::Descriptor(_) | Error::Metrics(_) => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
