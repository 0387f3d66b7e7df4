//! Uniform backend: every event in `vocab ∪ {END}` is equally likely,
//! independent of context. Useful as a null model in tests and baselines.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::EngineError;
use crate::lm_core::{LanguageModel, TokenSeq};

#[derive(Debug, Clone)]
pub struct UniformModel {
    vocab: BTreeSet<String>,
}

impl UniformModel {
    pub fn new<I, S>(vocab: I) -> Result<Self, EngineError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let vocab: BTreeSet<String> = vocab.into_iter().map(Into::into).collect();
        if vocab.is_empty() {
            return Err(EngineError::config("uniform model vocabulary is empty"));
        }
        if vocab.iter().any(String::is_empty) {
            return Err(EngineError::config("vocabulary contains an empty token"));
        }
        Ok(UniformModel { vocab })
    }

    /// Size of the event space, `|vocab| + 1` for the end event.
    pub fn event_space_size(&self) -> usize {
        self.vocab.len() + 1
    }

    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    fn token_logprob(&self) -> f64 {
        -((self.event_space_size() as f64).ln())
    }

    /// Log-probability of the end event, identical to any token's.
    pub fn end_logprob(&self, _prefix: &TokenSeq) -> f64 {
        self.token_logprob()
    }
}

impl LanguageModel for UniformModel {
    fn identity(&self) -> String {
        format!("uniform(vocab={})", self.vocab.len())
    }

    fn logprob_from(
        &self,
        acc: f64,
        _prefix: &TokenSeq,
        continuation: &TokenSeq,
    ) -> Result<f64, EngineError> {
        let per_token = self.token_logprob();
        let mut acc = acc;
        for _ in continuation.iter() {
            acc += per_token;
        }
        Ok(acc)
    }

    fn sample_continuation(
        &self,
        _prefix: &TokenSeq,
        stop_tokens: &BTreeSet<String>,
        max_tokens: usize,
        seed: u64,
    ) -> Result<TokenSeq, EngineError> {
        if max_tokens < 1 {
            return Err(EngineError::config("max_tokens must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tokens: Vec<&String> = self.vocab.iter().collect();
        let mut out = TokenSeq::new();
        while out.len() < max_tokens {
            let pick = rng.random_range(0..self.event_space_size());
            if pick == tokens.len() {
                break; // end event
            }
            let token = tokens[pick].clone();
            let stop = stop_tokens.contains(&token);
            out.push(token);
            if stop {
                break;
            }
        }
        Ok(out)
    }

    fn finite_vocab(&self) -> Option<&BTreeSet<String>> {
        Some(&self.vocab)
    }
}
