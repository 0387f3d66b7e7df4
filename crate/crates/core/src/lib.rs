//! Decoding engine for prompt-conditioned text generation.
//!
//! The engine generates text with sub-sentence beam search where candidates
//! are ranked by how well they predict the original prompt back (inverse
//! prompting), combined with normalized forward likelihood and, for poems, a
//! format penalty. On top of the decoder sit a generate-and-fine-tune
//! self-training loop and the evaluation statistics used to compare methods
//! from human rating records.
//!
//! Backends implement [`lm_core::LanguageModel`]; the crate ships a uniform
//! model, a trainable character n-gram model, and an HTTP client for remote
//! scoring services.

pub mod beam_search;
pub mod error;
pub mod eval_stats;
pub mod lm_client;
pub mod lm_core;
pub mod poem_format;
pub mod prompt_transform;
pub mod scoring;
pub mod self_training;

pub use error::EngineError;
