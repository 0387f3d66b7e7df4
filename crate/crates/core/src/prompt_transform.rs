//! Prompt templates and sub-sentence segmentation.
//!
//! A [`TransformTemplate`] holds three patterns: the forward pattern renders
//! the conditioning prompt, and the inverse pair rearranges a generated
//! candidate so the model can be asked to predict the original prompt back.
//! Patterns are data, not code: `{slot}` substitutes a field, `{generated}`
//! substitutes the candidate text, and literal braces are written `{{` `}}`.
//!
//! Sub-sentences are the unit of beam expansion and inverse scoring: a
//! delimiter token closes a segment, and trailing text without a delimiter
//! forms a final segment. Concatenating all segments in order reproduces the
//! input exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::lm_core::{TokenSeq, Tokenizer};

/// Name of the reserved placeholder carrying the generated candidate.
pub const GENERATED_SLOT: &str = "generated";

/// Named slot values for one prompt, e.g. `question`, `title`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PromptFields {
    slots: BTreeMap<String, String>,
}

impl PromptFields {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.slots.insert(name.into(), value.into());
        self
    }

    pub fn set(&mut self, name: impl Into<String>, value: impl Into<String>) {
        self.slots.insert(name.into(), value.into());
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.slots.get(name).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.slots.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Forward prompt pattern plus the inverse context/target pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformTemplate {
    pub name: String,
    /// Renders the conditioning prompt from slots.
    pub forward_pattern: String,
    /// Renders the rearranged candidate; must reference `{generated}`.
    pub inverse_context_pattern: String,
    /// Renders the text the model should predict back, from slots only.
    pub inverse_target_pattern: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Slot(String),
}

fn parse_pattern(pattern: &str) -> Result<Vec<Segment>, EngineError> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut chars = pattern.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '{' => {
                if chars.peek() == Some(&'{') {
                    chars.next();
                    literal.push('{');
                    continue;
                }
                if !literal.is_empty() {
                    segments.push(Segment::Literal(std::mem::take(&mut literal)));
                }
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some('{') => {
                            return Err(EngineError::config(format!(
                                "nested `{{` inside placeholder of pattern `{pattern}`"
                            )));
                        }
                        Some(c) => name.push(c),
                        None => {
                            return Err(EngineError::config(format!(
                                "unterminated placeholder in pattern `{pattern}`"
                            )));
                        }
                    }
                }
                if name.is_empty() {
                    return Err(EngineError::config(format!(
                        "empty placeholder in pattern `{pattern}`"
                    )));
                }
                segments.push(Segment::Slot(name));
            }
            '}' => {
                if chars.peek() == Some(&'}') {
                    chars.next();
                    literal.push('}');
                } else {
                    return Err(EngineError::config(format!(
                        "stray `}}` in pattern `{pattern}`; write `}}}}` for a literal brace"
                    )));
                }
            }
            c => literal.push(c),
        }
    }
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    Ok(segments)
}

fn pattern_slots(pattern: &str) -> Result<Vec<String>, EngineError> {
    Ok(parse_pattern(pattern)?
        .into_iter()
        .filter_map(|s| match s {
            Segment::Slot(name) => Some(name),
            Segment::Literal(_) => None,
        })
        .collect())
}

fn substitute(
    template_name: &str,
    pattern: &str,
    lookup: impl Fn(&str) -> Option<String>,
) -> Result<String, EngineError> {
    let mut out = String::new();
    for segment in parse_pattern(pattern)? {
        match segment {
            Segment::Literal(text) => out.push_str(&text),
            Segment::Slot(name) => match lookup(&name) {
                Some(value) => out.push_str(&value),
                None => {
                    return Err(EngineError::Template {
                        template: template_name.to_string(),
                        slot: name,
                    });
                }
            },
        }
    }
    Ok(out)
}

impl TransformTemplate {
    /// Check pattern syntax and the placeholder contract: the inverse context
    /// must reference `{generated}`, the other two patterns must not.
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.name.is_empty() {
            return Err(EngineError::config("template name is empty"));
        }
        let forward = pattern_slots(&self.forward_pattern)?;
        if forward.iter().any(|s| s == GENERATED_SLOT) {
            return Err(EngineError::config(format!(
                "template `{}`: forward pattern must not reference {{generated}}",
                self.name
            )));
        }
        let ctx = pattern_slots(&self.inverse_context_pattern)?;
        if !ctx.iter().any(|s| s == GENERATED_SLOT) {
            return Err(EngineError::config(format!(
                "template `{}`: inverse context pattern must reference {{generated}}",
                self.name
            )));
        }
        let target = pattern_slots(&self.inverse_target_pattern)?;
        if target.iter().any(|s| s == GENERATED_SLOT) {
            return Err(EngineError::config(format!(
                "template `{}`: inverse target pattern must not reference {{generated}}",
                self.name
            )));
        }
        Ok(())
    }

    /// Render the conditioning prompt text.
    pub fn render_forward_text(&self, fields: &PromptFields) -> Result<String, EngineError> {
        substitute(&self.name, &self.forward_pattern, |name| {
            fields.get(name).map(str::to_string)
        })
    }

    /// Render the conditioning prompt as tokens.
    pub fn render_forward(
        &self,
        fields: &PromptFields,
        tokenizer: &dyn Tokenizer,
    ) -> Result<TokenSeq, EngineError> {
        Ok(tokenizer.tokenize(&self.render_forward_text(fields)?))
    }

    /// Render the inverse pair for a generated candidate: the context the
    /// model is conditioned on and the target it should predict back.
    pub fn render_inverse(
        &self,
        fields: &PromptFields,
        generated: &TokenSeq,
        tokenizer: &dyn Tokenizer,
    ) -> Result<(TokenSeq, TokenSeq), EngineError> {
        let generated_text = generated.render();
        let context = substitute(&self.name, &self.inverse_context_pattern, |name| {
            if name == GENERATED_SLOT {
                Some(generated_text.clone())
            } else {
                fields.get(name).map(str::to_string)
            }
        })?;
        let target = substitute(&self.name, &self.inverse_target_pattern, |name| {
            fields.get(name).map(str::to_string)
        })?;
        Ok((tokenizer.tokenize(&context), tokenizer.tokenize(&target)))
    }
}

/// The built-in template pack shipped with the engine.
pub fn builtin_templates() -> &'static [TransformTemplate] {
    static PACK: OnceLock<Vec<TransformTemplate>> = OnceLock::new();
    PACK.get_or_init(|| {
        let pack: Vec<TransformTemplate> =
            serde_json::from_str(include_str!("../assets/templates.json"))
                .expect("built-in template pack is valid JSON");
        for template in &pack {
            template
                .validate()
                .expect("built-in template pack validates");
        }
        pack
    })
}

/// Load a template pack file: a JSON array of template objects.
pub fn load_template_pack(path: &Path) -> Result<Vec<TransformTemplate>, EngineError> {
    let json = fs::read_to_string(path)?;
    let pack: Vec<TransformTemplate> = serde_json::from_str(&json)
        .map_err(|e| EngineError::config(format!("invalid template pack {}: {e}", path.display())))?;
    for template in &pack {
        template.validate()?;
    }
    Ok(pack)
}

/// Look up a template by name.
pub fn find_template<'a>(
    pack: &'a [TransformTemplate],
    name: &str,
) -> Result<&'a TransformTemplate, EngineError> {
    pack.iter()
        .find(|t| t.name == name)
        .ok_or_else(|| EngineError::config(format!("unknown template `{name}`")))
}

/// Default sub-sentence delimiters: Chinese and Latin clause punctuation.
pub fn default_delimiters() -> BTreeSet<String> {
    ["，", "。", "？", "！", "；", ",", ".", "?", "!", ";"]
        .into_iter()
        .map(String::from)
        .collect()
}

/// What closed a sub-sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    /// The segment ends with this delimiter token.
    Delimiter(String),
    /// The segment ran to the end of the text without a delimiter.
    End,
}

/// One punctuation-delimited segment of a generated text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubSentence {
    /// Segment tokens, including the trailing delimiter when present.
    pub text: TokenSeq,
    pub terminal: Terminal,
    /// Position within the generation.
    pub index: usize,
}

impl SubSentence {
    /// Segment tokens without the trailing delimiter.
    pub fn content_tokens(&self) -> &[String] {
        let tokens = self.text.tokens();
        match self.terminal {
            Terminal::Delimiter(_) => &tokens[..tokens.len() - 1],
            Terminal::End => tokens,
        }
    }
}

/// Split after each delimiter token. The concatenation of all segments in
/// index order reproduces `text` exactly; empty text yields no segments.
pub fn segment_subsentences(text: &TokenSeq, delimiters: &BTreeSet<String>) -> Vec<SubSentence> {
    let mut segments = Vec::new();
    let mut start = 0;
    let tokens = text.tokens();
    for (i, token) in tokens.iter().enumerate() {
        if delimiters.contains(token) {
            segments.push(SubSentence {
                text: text.slice(start, i + 1),
                terminal: Terminal::Delimiter(token.clone()),
                index: segments.len(),
            });
            start = i + 1;
        }
    }
    if start < tokens.len() {
        segments.push(SubSentence {
            text: text.slice(start, tokens.len()),
            terminal: Terminal::End,
            index: segments.len(),
        });
    }
    segments
}
