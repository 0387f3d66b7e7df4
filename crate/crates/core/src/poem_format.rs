//! Poem format penalty.
//!
//! The penalty is a weighted sum of violation counts over four components:
//! line lengths, repeated token n-grams, rhyme-class agreement at designated
//! line positions, and per-position tone requirements. Rhyme and tone lookups
//! run against pluggable data tables; unmapped tokens resolve to an unknown
//! value (a rhyme violation, but tone-free) rather than an error.
//!
//! Lines are sub-sentences; the trailing delimiter of a line never counts
//! toward its length, rhyme carrier, or tones.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::prompt_transform::SubSentence;

/// Tone classes of classical prosody.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToneClass {
    Level,
    Oblique,
}

/// Per-position tone requirement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToneRequirement {
    Level,
    Oblique,
    Free,
}

/// Component weights of the penalty, each non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FormatWeights {
    pub length: f64,
    pub repetition: f64,
    pub rhyme: f64,
    pub tone: f64,
}

impl Default for FormatWeights {
    fn default() -> Self {
        FormatWeights {
            length: 1.0,
            repetition: 1.0,
            rhyme: 1.0,
            tone: 1.0,
        }
    }
}

/// Line, length, rhyme, and tone constraints for one poem form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoemFormatSpec {
    /// Required number of lines: 4 (jueju) or 8 (lvshi).
    pub n_lines: usize,
    /// Required characters per line: 5 or 7.
    pub chars_per_line: usize,
    /// Line indices required to share a rhyme class.
    pub rhyme_positions: BTreeSet<usize>,
    /// Optional per-line, per-character tone requirements. Missing rows or
    /// entries are free.
    #[serde(default)]
    pub tone_pattern: Option<Vec<Vec<ToneRequirement>>>,
    #[serde(default)]
    pub weights: FormatWeights,
}

impl PoemFormatSpec {
    /// Quatrain form: 4 lines of 5 or 7 characters, even lines rhyming.
    pub fn jueju(chars_per_line: usize) -> Self {
        PoemFormatSpec {
            n_lines: 4,
            chars_per_line,
            rhyme_positions: [1, 3].into(),
            tone_pattern: None,
            weights: FormatWeights::default(),
        }
    }

    /// Regulated verse form: 8 lines of 5 or 7 characters, even lines rhyming.
    pub fn lvshi(chars_per_line: usize) -> Self {
        PoemFormatSpec {
            n_lines: 8,
            chars_per_line,
            rhyme_positions: [1, 3, 5, 7].into(),
            tone_pattern: None,
            weights: FormatWeights::default(),
        }
    }

    /// Look up one of the four named classical forms.
    pub fn named(name: &str) -> Result<Self, EngineError> {
        match name {
            "5-jueju" => Ok(Self::jueju(5)),
            "7-jueju" => Ok(Self::jueju(7)),
            "5-lvshi" => Ok(Self::lvshi(5)),
            "7-lvshi" => Ok(Self::lvshi(7)),
            other => Err(EngineError::config(format!("unknown poem form `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !matches!(self.n_lines, 4 | 8) {
            return Err(EngineError::config("n_lines must be 4 or 8"));
        }
        if !matches!(self.chars_per_line, 5 | 7) {
            return Err(EngineError::config("chars_per_line must be 5 or 7"));
        }
        if self.rhyme_positions.iter().any(|&p| p >= self.n_lines) {
            return Err(EngineError::config("rhyme position outside [0, n_lines)"));
        }
        let ws = [
            self.weights.length,
            self.weights.repetition,
            self.weights.rhyme,
            self.weights.tone,
        ];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(EngineError::config("weights must be non-negative finite reals"));
        }
        Ok(())
    }

    pub fn load_file(path: &Path) -> Result<Self, EngineError> {
        let json = fs::read_to_string(path)?;
        let spec: PoemFormatSpec = serde_json::from_str(&json)
            .map_err(|e| EngineError::config(format!("invalid format spec {}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Rhyme-class and tone lookup tables. Unmapped tokens are unknown, never an
/// error: unknown rhyme counts as a violation, unknown tone is free.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RhymeToneTables {
    pub rhyme_class: BTreeMap<String, u32>,
    pub tone: BTreeMap<String, ToneClass>,
}

impl RhymeToneTables {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn rhyme_of(&self, token: &str) -> Option<u32> {
        self.rhyme_class.get(token).copied()
    }

    pub fn tone_of(&self, token: &str) -> Option<ToneClass> {
        self.tone.get(token).copied()
    }

    pub fn load_file(path: &Path) -> Result<Self, EngineError> {
        let json = fs::read_to_string(path)?;
        serde_json::from_str(&json)
            .map_err(|e| EngineError::config(format!("invalid rhyme/tone tables {}: {e}", path.display())))
    }
}

/// Which component a violation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    Length,
    Repetition,
    Rhyme,
    Tone,
}

/// One itemized violation. `weighted == magnitude * component weight`, and
/// the total penalty is the sum of `weighted` over all items.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
    pub magnitude: f64,
    pub weighted: f64,
}

/// Compute the format penalty of a segmented poem. Returns the non-negative
/// penalty and the itemized violations that sum to it; zero-weight components
/// contribute no items, so the penalty is zero iff the list is empty.
pub fn l_format(
    poem: &[SubSentence],
    spec: &PoemFormatSpec,
    tables: &RhymeToneTables,
) -> Result<(f64, Vec<Violation>), EngineError> {
    if poem.is_empty() {
        return Err(EngineError::score("cannot score an empty poem"));
    }
    let lines: Vec<&[String]> = poem.iter().map(SubSentence::content_tokens).collect();
    let mut violations = Vec::new();

    if spec.weights.length > 0.0 {
        for (i, line) in lines.iter().enumerate() {
            let deviation = line.len().abs_diff(spec.chars_per_line);
            if deviation > 0 {
                push_violation(
                    &mut violations,
                    ViolationKind::Length,
                    spec.weights.length,
                    deviation as f64,
                    format!("line {i} has {} characters, expected {}", line.len(), spec.chars_per_line),
                );
            }
        }
        let line_count_gap = lines.len().abs_diff(spec.n_lines);
        if line_count_gap > 0 {
            push_violation(
                &mut violations,
                ViolationKind::Length,
                spec.weights.length,
                (line_count_gap * spec.chars_per_line) as f64,
                format!("poem has {} lines, expected {}", lines.len(), spec.n_lines),
            );
        }
    }

    if spec.weights.repetition > 0.0 {
        let flat: Vec<&String> = lines.iter().flat_map(|l| l.iter()).collect();
        let mut seen: HashMap<Vec<&String>, usize> = HashMap::new();
        for n in 2..flat.len() {
            for window in flat.windows(n) {
                *seen.entry(window.to_vec()).or_insert(0) += 1;
            }
        }
        let mut repeats: Vec<(String, usize)> = seen
            .into_iter()
            .filter(|(_, occurrences)| *occurrences >= 2)
            .map(|(gram, occurrences)| {
                let text: String = gram.iter().map(|t| t.as_str()).collect();
                (text, occurrences - 1)
            })
            .collect();
        repeats.sort();
        for (gram, extra) in repeats {
            push_violation(
                &mut violations,
                ViolationKind::Repetition,
                spec.weights.repetition,
                extra as f64,
                format!("n-gram `{gram}` repeats {extra} extra time(s)"),
            );
        }
    }

    if spec.weights.rhyme > 0.0 {
        let carriers: Vec<(usize, Option<u32>)> = spec
            .rhyme_positions
            .iter()
            .map(|&pos| {
                let class = lines
                    .get(pos)
                    .and_then(|line| line.last())
                    .and_then(|token| tables.rhyme_of(token));
                (pos, class)
            })
            .collect();
        let mut class_votes: BTreeMap<u32, usize> = BTreeMap::new();
        for (_, class) in &carriers {
            if let Some(c) = class {
                *class_votes.entry(*c).or_insert(0) += 1;
            }
        }
        // Majority class over the rhyme positions; ties break to the lowest
        // class id for determinism.
        let majority = class_votes
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(class, _)| *class);
        for (pos, class) in carriers {
            let violates = match (class, majority) {
                (None, _) => true,
                (Some(c), Some(m)) => c != m,
                (Some(_), None) => unreachable!("a known class implies a majority"),
            };
            if violates {
                let detail = match class {
                    None => format!("line {pos} has no known rhyme class"),
                    Some(c) => format!("line {pos} rhyme class {c} differs from the majority"),
                };
                push_violation(&mut violations, ViolationKind::Rhyme, spec.weights.rhyme, 1.0, detail);
            }
        }
    }

    if spec.weights.tone > 0.0 {
        if let Some(pattern) = &spec.tone_pattern {
            for (li, row) in pattern.iter().enumerate() {
                let Some(line) = lines.get(li) else { continue };
                for (ci, requirement) in row.iter().enumerate() {
                    let required = match requirement {
                        ToneRequirement::Free => continue,
                        ToneRequirement::Level => ToneClass::Level,
                        ToneRequirement::Oblique => ToneClass::Oblique,
                    };
                    let Some(token) = line.get(ci) else { continue };
                    match tables.tone_of(token) {
                        Some(tone) if tone != required => {
                            push_violation(
                                &mut violations,
                                ViolationKind::Tone,
                                spec.weights.tone,
                                1.0,
                                format!("line {li} position {ci}: tone {tone:?} contradicts {requirement:?}"),
                            );
                        }
                        _ => {} // compliant or unknown (unknown tones are free)
                    }
                }
            }
        }
    }

    let penalty: f64 = violations.iter().map(|v| v.weighted).sum();
    Ok((penalty, violations))
}

fn push_violation(
    violations: &mut Vec<Violation>,
    kind: ViolationKind,
    weight: f64,
    magnitude: f64,
    detail: String,
) {
    violations.push(Violation {
        kind,
        detail,
        magnitude,
        weighted: magnitude * weight,
    });
}

/// A format spec paired with its lookup tables, ready to score poems.
#[derive(Debug, Clone)]
pub struct FormatScorer {
    pub spec: PoemFormatSpec,
    pub tables: RhymeToneTables,
}

impl FormatScorer {
    pub fn new(spec: PoemFormatSpec, tables: RhymeToneTables) -> Result<Self, EngineError> {
        spec.validate()?;
        Ok(FormatScorer { spec, tables })
    }

    pub fn penalty(&self, poem: &[SubSentence]) -> Result<(f64, Vec<Violation>), EngineError> {
        l_format(poem, &self.spec, &self.tables)
    }
}
