//! Token sequences and tokenizers.
//!
//! A [`TokenSeq`] is the currency every module trades in: an ordered list of
//! non-empty string tokens whose concatenation reproduces the original text
//! exactly. The default [`CharTokenizer`] emits one unicode character per
//! token, which keeps the n-gram backend trivial and matches character-level
//! scoring; backends that own their own vocabulary can plug in a different
//! [`Tokenizer`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::EngineError;

/// An ordered sequence of tokens. Each token is a non-empty string.
///
/// `render(tokenize(text)) == text` holds for every tokenizer implementing
/// [`Tokenizer`], so a `TokenSeq` is a lossless view of a text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TokenSeq {
    tokens: Vec<String>,
}

impl TokenSeq {
    /// The empty sequence.
    pub fn new() -> Self {
        Self::default()
    }

    /// Tokenize `text` with the default per-character tokenizer.
    pub fn from_text(text: &str) -> Self {
        CharTokenizer.tokenize(text)
    }

    /// Build a sequence from explicit tokens, rejecting empty tokens.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, EngineError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if let Some(pos) = tokens.iter().position(String::is_empty) {
            return Err(EngineError::config(format!(
                "token at position {pos} is empty"
            )));
        }
        Ok(Self { tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Append a token. Panics on an empty token: sequences are only ever
    /// extended with tokens drawn from a model vocabulary or a tokenizer,
    /// both of which guarantee non-emptiness.
    pub fn push(&mut self, token: impl Into<String>) {
        let token = token.into();
        assert!(!token.is_empty(), "TokenSeq tokens must be non-empty");
        self.tokens.push(token);
    }

    /// Append all tokens of `other`.
    pub fn extend(&mut self, other: &TokenSeq) {
        self.tokens.extend_from_slice(&other.tokens);
    }

    /// `self` followed by `other`, as a new sequence.
    pub fn concat(&self, other: &TokenSeq) -> TokenSeq {
        let mut tokens = Vec::with_capacity(self.len() + other.len());
        tokens.extend_from_slice(&self.tokens);
        tokens.extend_from_slice(&other.tokens);
        TokenSeq { tokens }
    }

    /// Sub-sequence over a token index range.
    pub fn slice(&self, start: usize, end: usize) -> TokenSeq {
        TokenSeq {
            tokens: self.tokens[start..end].to_vec(),
        }
    }

    /// Exact text this sequence stands for.
    pub fn render(&self) -> String {
        self.tokens.concat()
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl TryFrom<Vec<String>> for TokenSeq {
    type Error = EngineError;

    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        TokenSeq::from_tokens(tokens)
    }
}

impl From<TokenSeq> for Vec<String> {
    fn from(seq: TokenSeq) -> Self {
        seq.tokens
    }
}

impl<'a> IntoIterator for &'a TokenSeq {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.tokens.iter()
    }
}

/// Splits text into tokens. Implementations must be lossless:
/// `tokenize(text).render() == text`.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> TokenSeq;
}

/// One unicode character per token. Lossless for any input.
#[derive(Debug, Clone, Copy, Default)]
pub struct CharTokenizer;

impl Tokenizer for CharTokenizer {
    fn tokenize(&self, text: &str) -> TokenSeq {
        TokenSeq {
            tokens: text.chars().map(String::from).collect(),
        }
    }
}
