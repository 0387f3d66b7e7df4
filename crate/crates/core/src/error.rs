//! Engine-wide error type.

use crate::beam_search::SearchTrace;

/// Errors produced by the decoding engine.
///
/// Variants map one-to-one onto the CLI exit codes: `Config`, `Template` and
/// `Score` are caller mistakes (exit 2), `Io` is exit 3, `Search` and
/// `SelfTrain` are exit 4, `Backend` and `Protocol` are exit 5.
#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    /// Invalid configuration, parameters, or input data.
    #[error("config error: {0}")]
    Config(String),

    /// A pattern referenced a slot that was not supplied.
    #[error("template error: template `{template}` is missing slot `{slot}`")]
    Template { template: String, slot: String },

    /// Scoring precondition violated (empty text, zero sub-sentences, ...).
    #[error("score error: {0}")]
    Score(String),

    /// Beam search could not produce any scored candidate. Carries the trace
    /// collected up to the failure so the run can be audited offline.
    #[error("search error: {message}")]
    Search {
        message: String,
        trace: Box<SearchTrace>,
    },

    /// Every title in a self-training cycle failed to generate.
    #[error("self-training error: {0}")]
    SelfTrain(String),

    /// Remote backend transport failure. `retryable` is true for timeouts
    /// and connection errors, false for definitive HTTP failures.
    #[error("backend error{}: {message}", if *.retryable { " (retryable)" } else { "" })]
    Backend { message: String, retryable: bool },

    /// The remote service answered with a payload that violates the wire
    /// protocol (wrong schema, wrong count, ...).
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl EngineError {
    pub fn config(msg: impl Into<String>) -> Self {
        EngineError::Config(msg.into())
    }

    pub fn score(msg: impl Into<String>) -> Self {
        EngineError::Score(msg.into())
    }

    pub fn protocol(msg: impl Into<String>) -> Self {
        EngineError::Protocol(msg.into())
    }

    pub fn backend(msg: impl Into<String>, retryable: bool) -> Self {
        EngineError::Backend {
            message: msg.into(),
            retryable,
        }
    }
}
