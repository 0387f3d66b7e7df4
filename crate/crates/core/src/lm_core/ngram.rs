//! Trainable character n-gram model with additive smoothing.
//!
//! The model counts every window of a document including a start padding
//! context (positions near the document head condition on fewer tokens) and
//! one terminal end event per document. Conditional probabilities are
//! add-alpha smoothed over the event space `vocab ∪ {END}`:
//!
//! ```text
//! p(e | ctx) = (count(ctx, e) + alpha) / (total(ctx) + alpha * (|vocab| + 1))
//! ```
//!
//! Tokens outside the vocabulary are scored as zero-count events, so every
//! log-probability stays finite. Models are immutable after training;
//! [`NGramModel::fine_tune`] returns a new model value.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::lm_core::{categorical_pick, LanguageModel, TokenSeq, Tokenizer};

/// A training corpus: one token sequence per document.
pub type Corpus = Vec<TokenSeq>;

/// An event in a conditional distribution: a vocabulary token or the
/// document-terminal marker.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Token(String),
    End,
}

#[derive(Debug, Clone, Default)]
struct ContextCounts {
    events: BTreeMap<Event, f64>,
    total: f64,
}

impl ContextCounts {
    fn add(&mut self, event: Event, weight: f64) {
        *self.events.entry(event).or_insert(0.0) += weight;
        self.total += weight;
    }

    fn count(&self, event: &Event) -> f64 {
        self.events.get(event).copied().unwrap_or(0.0)
    }
}

/// Character n-gram model with additive smoothing. See the module docs for
/// the probability definition.
#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    smoothing_alpha: f64,
    vocab: BTreeSet<String>,
    counts: BTreeMap<Vec<String>, ContextCounts>,
    temperature: f64,
}

impl NGramModel {
    /// Train a model of the given order on a corpus.
    pub fn train(corpus: &[TokenSeq], order: usize, smoothing_alpha: f64) -> Result<Self, EngineError> {
        if order < 1 {
            return Err(EngineError::config("n-gram order must be >= 1"));
        }
        if !(smoothing_alpha > 0.0) || !smoothing_alpha.is_finite() {
            return Err(EngineError::config("smoothing alpha must be a positive finite real"));
        }
        if corpus.is_empty() {
            return Err(EngineError::config("training corpus is empty"));
        }
        let mut model = NGramModel {
            order,
            smoothing_alpha,
            vocab: BTreeSet::new(),
            counts: BTreeMap::new(),
            temperature: 1.0,
        };
        for (i, doc) in corpus.iter().enumerate() {
            if doc.is_empty() {
                return Err(EngineError::config(format!("corpus document {i} is empty")));
            }
            model.add_document(doc, 1.0);
        }
        Ok(model)
    }

    /// New model whose counts are incremented by `weight` times the window
    /// counts of `documents`. The vocabulary is extended by unseen tokens.
    /// An empty document list is a no-op and returns an equal model.
    pub fn fine_tune(&self, documents: &[TokenSeq], weight: f64) -> Result<Self, EngineError> {
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(EngineError::config("fine-tune weight must be a positive finite real"));
        }
        let mut tuned = self.clone();
        for doc in documents {
            if doc.is_empty() {
                continue;
            }
            tuned.add_document(doc, weight);
        }
        Ok(tuned)
    }

    fn add_document(&mut self, doc: &TokenSeq, weight: f64) {
        let tokens = doc.tokens();
        for token in tokens {
            self.vocab.insert(token.clone());
        }
        for (i, token) in tokens.iter().enumerate() {
            let ctx = self.context_of(&tokens[..i]);
            self.counts
                .entry(ctx)
                .or_default()
                .add(Event::Token(token.clone()), weight);
        }
        let end_ctx = self.context_of(tokens);
        self.counts.entry(end_ctx).or_default().add(Event::End, weight);
    }

    /// The conditioning context for the position right after `preceding`:
    /// its last `order - 1` tokens.
    fn context_of(&self, preceding: &[String]) -> Vec<String> {
        let keep = self.order - 1;
        let start = preceding.len().saturating_sub(keep);
        preceding[start..].to_vec()
    }

    /// Size of the smoothed event space, `|vocab| + 1` for the end event.
    pub fn event_space_size(&self) -> usize {
        self.vocab.len() + 1
    }

    fn event_logprob(&self, preceding: &[String], event: &Event) -> f64 {
        let ctx = self.context_of(preceding);
        let (count, total) = match self.counts.get(&ctx) {
            Some(counts) => (counts.count(event), counts.total),
            None => (0.0, 0.0),
        };
        let denom = total + self.smoothing_alpha * self.event_space_size() as f64;
        ((count + self.smoothing_alpha) / denom).ln()
    }

    /// Log-probability of the document-terminal event after `prefix`.
    pub fn end_logprob(&self, prefix: &TokenSeq) -> f64 {
        self.event_logprob(prefix.tokens(), &Event::End)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing_alpha(&self) -> f64 {
        self.smoothing_alpha
    }

    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    /// Sampling temperature (log-probabilities are unaffected). Default 1.0.
    pub fn with_temperature(mut self, temperature: f64) -> Result<Self, EngineError> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(EngineError::config("temperature must be a positive finite real"));
        }
        self.temperature = temperature;
        Ok(self)
    }

    /// Sampling weights over `vocab ∪ {END}` in deterministic order
    /// (vocabulary order, then the end event). The shared smoothing
    /// denominator cancels, so raw `count + alpha` masses suffice; a
    /// temperature t reweights them as `(count + alpha)^(1/t)`.
    fn sampling_weights(&self, preceding: &[String]) -> (Vec<&str>, Vec<f64>) {
        let ctx = self.context_of(preceding);
        let counts = self.counts.get(&ctx);
        let inv_temp = 1.0 / self.temperature;
        let weight_of = |count: f64| {
            let base = count + self.smoothing_alpha;
            if self.temperature == 1.0 {
                base
            } else {
                base.powf(inv_temp)
            }
        };
        let mut labels: Vec<&str> = Vec::with_capacity(self.vocab.len());
        let mut weights: Vec<f64> = Vec::with_capacity(self.vocab.len() + 1);
        for token in &self.vocab {
            let count = counts.map_or(0.0, |c| c.count(&Event::Token(token.clone())));
            labels.push(token);
            weights.push(weight_of(count));
        }
        let end_count = counts.map_or(0.0, |c| c.count(&Event::End));
        weights.push(weight_of(end_count));
        (labels, weights)
    }

    /// Serialize to the versioned JSON model format.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&FileModel::from(self)).expect("model serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self, EngineError> {
        let file: FileModel = serde_json::from_str(json)
            .map_err(|e| EngineError::config(format!("invalid model file: {e}")))?;
        file.try_into()
    }

    pub fn save_file(&self, path: &Path) -> Result<(), EngineError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load_file(path: &Path) -> Result<Self, EngineError> {
        let json = fs::read_to_string(path)?;
        Self::from_json(&json)
    }
}

impl LanguageModel for NGramModel {
    fn identity(&self) -> String {
        let events: f64 = self.counts.values().map(|c| c.total).sum();
        format!(
            "ngram(order={},alpha={},vocab={},events={})",
            self.order,
            self.smoothing_alpha,
            self.vocab.len(),
            events
        )
    }

    fn logprob_from(
        &self,
        acc: f64,
        prefix: &TokenSeq,
        continuation: &TokenSeq,
    ) -> Result<f64, EngineError> {
        let mut acc = acc;
        let keep = self.order - 1;
        let mut window: Vec<String> = {
            let toks = prefix.tokens();
            let start = toks.len().saturating_sub(keep);
            toks[start..].to_vec()
        };
        for token in continuation.iter() {
            acc += self.event_logprob(&window, &Event::Token(token.to_string()));
            if keep > 0 {
                window.push(token.to_string());
                if window.len() > keep {
                    window.remove(0);
                }
            }
        }
        Ok(acc)
    }

    fn sample_continuation(
        &self,
        prefix: &TokenSeq,
        stop_tokens: &BTreeSet<String>,
        max_tokens: usize,
        seed: u64,
    ) -> Result<TokenSeq, EngineError> {
        if max_tokens < 1 {
            return Err(EngineError::config("max_tokens must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut window: Vec<String> = prefix.tokens().to_vec();
        let mut out = TokenSeq::new();
        while out.len() < max_tokens {
            let (labels, weights) = self.sampling_weights(&window);
            let pick = categorical_pick(&weights, rng.random::<f64>());
            if pick == labels.len() {
                break; // end event sampled
            }
            let token = labels[pick].to_string();
            window.push(token.clone());
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

/// On-disk model schema, version 1. The end event is stored under the empty
/// string key, which cannot collide with tokens (tokens are non-empty).
#[derive(Serialize, Deserialize)]
struct FileModel {
    format: String,
    version: u32,
    order: usize,
    smoothing_alpha: f64,
    vocab: Vec<String>,
    counts: Vec<FileContext>,
}

#[derive(Serialize, Deserialize)]
struct FileContext {
    context: Vec<String>,
    events: BTreeMap<String, f64>,
}

const MODEL_FORMAT: &str = "inverse-decode/ngram";

impl From<&NGramModel> for FileModel {
    fn from(model: &NGramModel) -> Self {
        FileModel {
            format: MODEL_FORMAT.to_string(),
            version: 1,
            order: model.order,
            smoothing_alpha: model.smoothing_alpha,
            vocab: model.vocab.iter().cloned().collect(),
            counts: model
                .counts
                .iter()
                .map(|(ctx, counts)| FileContext {
                    context: ctx.clone(),
                    events: counts
                        .events
                        .iter()
                        .map(|(ev, n)| {
                            let key = match ev {
                                Event::Token(t) => t.clone(),
                                Event::End => String::new(),
                            };
                            (key, *n)
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<FileModel> for NGramModel {
    type Error = EngineError;

    fn try_from(file: FileModel) -> Result<Self, Self::Error> {
        if file.format != MODEL_FORMAT {
            return Err(EngineError::config(format!(
                "unexpected model format `{}`",
                file.format
            )));
        }
        if file.version != 1 {
            return Err(EngineError::config(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        if file.order < 1 {
            return Err(EngineError::config("n-gram order must be >= 1"));
        }
        if !(file.smoothing_alpha > 0.0) || !file.smoothing_alpha.is_finite() {
            return Err(EngineError::config("smoothing alpha must be a positive finite real"));
        }
        let mut vocab: BTreeSet<String> = BTreeSet::new();
        for token in &file.vocab {
            if token.is_empty() {
                return Err(EngineError::config("vocabulary contains an empty token"));
            }
            vocab.insert(token.clone());
        }
        let mut counts: BTreeMap<Vec<String>, ContextCounts> = BTreeMap::new();
        for entry in file.counts {
            if entry.context.len() > file.order.saturating_sub(1) {
                return Err(EngineError::config(format!(
                    "context {:?} longer than order-1",
                    entry.context
                )));
            }
            let mut ctx_counts = ContextCounts::default();
            for (key, n) in entry.events {
                if !(n >= 0.0) || !n.is_finite() {
                    return Err(EngineError::config("counts must be non-negative finite reals"));
                }
                let event = if key.is_empty() {
                    Event::End
                } else {
                    vocab.insert(key.clone());
                    Event::Token(key)
                };
                ctx_counts.add(event, n);
            }
            for token in &entry.context {
                if token.is_empty() {
                    return Err(EngineError::config("context contains an empty token"));
                }
                vocab.insert(token.clone());
            }
            counts.insert(entry.context, ctx_counts);
        }
        Ok(NGramModel {
            order: file.order,
            smoothing_alpha: file.smoothing_alpha,
            vocab,
            counts,
            temperature: 1.0,
        })
    }
}

#[derive(Deserialize)]
struct CorpusLine {
    text: String,
}

/// Read a UTF-8 JSONL corpus, one `{"text": string}` object per line. Blank
/// lines are skipped; empty texts and malformed lines are errors.
pub fn read_corpus_jsonl(path: &Path, tokenizer: &dyn Tokenizer) -> Result<Corpus, EngineError> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut corpus = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CorpusLine = serde_json::from_str(&line).map_err(|e| {
            EngineError::config(format!("{}:{}: invalid corpus line: {e}", path.display(), i + 1))
        })?;
        if parsed.text.is_empty() {
            return Err(EngineError::config(format!(
                "{}:{}: corpus document is empty",
                path.display(),
                i + 1
            )));
        }
        corpus.push(tokenizer.tokenize(&parsed.text));
    }
    Ok(corpus)
}
