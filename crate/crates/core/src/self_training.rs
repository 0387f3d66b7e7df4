//! Generate-and-fine-tune self-training loop.
//!
//! Each cycle generates poems for every title with the full inverse scoring
//! pipeline, then fine-tunes the n-gram backend on the generated poems and
//! carries the tuned model into the next cycle. Reports track proxy metrics
//! (mean composite score, mean format penalty, prompt-token overlap); no
//! quality claim is attached to them.

use serde::{Deserialize, Serialize};

use crate::beam_search::{run_beam_search, BeamParams};
use crate::error::EngineError;
use crate::lm_core::{derive_seed, NGramModel, TokenSeq};
use crate::poem_format::{FormatScorer, PoemFormatSpec, RhymeToneTables};
use crate::prompt_transform::{PromptFields, TransformTemplate};
use crate::scoring::{CompositeScorer, ScoreBreakdown, ScoreMode, ScorerConfig};

/// Hard ceilings keeping desk runs finite, overridable per config.
pub const DEFAULT_MAX_CYCLES: usize = 16;
pub const DEFAULT_MAX_POEMS_PER_TITLE: usize = 64;

/// Configuration of one self-training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelfTrainConfig {
    pub titles: Vec<PromptFields>,
    pub cycles: usize,
    pub poems_per_title: usize,
    pub fine_tune_weight: f64,
    pub beam: BeamParams,
    /// Must be in `inverse_poem` mode.
    pub scorer: ScorerConfig,
    pub format_spec: PoemFormatSpec,
    #[serde(default)]
    pub tables: RhymeToneTables,
    pub template: TransformTemplate,
    /// When set, fine-tune only on the top-k poems of each cycle by total.
    #[serde(default)]
    pub top_k_per_cycle: Option<usize>,
    #[serde(default = "default_max_cycles")]
    pub max_cycles: usize,
    #[serde(default = "default_max_poems_per_title")]
    pub max_poems_per_title: usize,
}

fn default_max_cycles() -> usize {
    DEFAULT_MAX_CYCLES
}

fn default_max_poems_per_title() -> usize {
    DEFAULT_MAX_POEMS_PER_TITLE
}

impl SelfTrainConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.titles.is_empty() {
            return Err(EngineError::config("self-training needs at least one title"));
        }
        if self.cycles < 1 || self.cycles > self.max_cycles {
            return Err(EngineError::config(format!(
                "cycles must be in [1, {}]",
                self.max_cycles
            )));
        }
        if self.poems_per_title < 1 || self.poems_per_title > self.max_poems_per_title {
            return Err(EngineError::config(format!(
                "poems_per_title must be in [1, {}]",
                self.max_poems_per_title
            )));
        }
        if !(self.fine_tune_weight > 0.0) || !self.fine_tune_weight.is_finite() {
            return Err(EngineError::config("fine_tune_weight must be a positive finite real"));
        }
        if self.scorer.mode != ScoreMode::InversePoem {
            return Err(EngineError::config("self-training scores poems; scorer mode must be inverse_poem"));
        }
        self.beam.validate()?;
        self.scorer.validate()?;
        self.format_spec.validate()?;
        self.template.validate()?;
        Ok(())
    }
}

/// One generated poem as persisted in the cycle record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratedPoem {
    pub title: PromptFields,
    pub poem: String,
    pub breakdown: ScoreBreakdown,
    pub cycle: usize,
}

/// Per-cycle metrics plus the poems generated in that cycle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleReport {
    pub cycle: usize,
    pub n_generated: usize,
    pub n_failed: usize,
    pub mean_total: f64,
    pub mean_format_penalty: f64,
    pub mean_prompt_overlap: f64,
    pub poems: Vec<GeneratedPoem>,
}

/// Fraction of the distinct tokens in the title fields that also appear in
/// `text`. Zero when the fields carry no tokens.
pub fn prompt_token_overlap(fields: &PromptFields, text: &TokenSeq) -> f64 {
    let mut field_tokens = std::collections::BTreeSet::new();
    for (_, value) in fields.iter() {
        for token in TokenSeq::from_text(value).iter() {
            field_tokens.insert(token.to_string());
        }
    }
    if field_tokens.is_empty() {
        return 0.0;
    }
    let text_tokens: std::collections::BTreeSet<&str> = text.iter().collect();
    let hits = field_tokens
        .iter()
        .filter(|t| text_tokens.contains(t.as_str()))
        .count();
    hits as f64 / field_tokens.len() as f64
}

/// Run the self-training loop. Generation failures for individual titles are
/// logged and skipped; a cycle in which every title fails is an error.
/// Returns the model after the last cycle and one report per cycle.
pub fn run_self_training(
    model: &NGramModel,
    config: &SelfTrainConfig,
) -> Result<(NGramModel, Vec<CycleReport>), EngineError> {
    config.validate()?;
    let mut current = model.clone();
    let mut reports = Vec::with_capacity(config.cycles);

    for cycle in 0..config.cycles {
        let mut poems: Vec<GeneratedPoem> = Vec::new();
        let mut failed = 0usize;
        for (title_idx, title) in config.titles.iter().enumerate() {
            for poem_idx in 0..config.poems_per_title {
                let seed = derive_seed(
                    config.beam.rng_seed,
                    &[cycle as u64, title_idx as u64, poem_idx as u64],
                );
                let params = config.beam.clone().with_seed(seed);
                let format =
                    FormatScorer::new(config.format_spec.clone(), config.tables.clone())?;
                let scorer = CompositeScorer::new(
                    &current,
                    &config.template,
                    title,
                    config.scorer.clone(),
                    Some(format),
                )?;
                match run_beam_search(&current, &config.template, title, &params, &scorer) {
                    Ok(outcome) => poems.push(GeneratedPoem {
                        title: title.clone(),
                        poem: outcome.best.text.render(),
                        breakdown: outcome.best.breakdown,
                        cycle,
                    }),
                    Err(EngineError::Search { message, .. }) => {
                        log::warn!(
                            "cycle {cycle}: generation failed for title {title_idx} ({message}); skipping"
                        );
                        failed += 1;
                    }
                    Err(other) => return Err(other),
                }
            }
        }
        if poems.is_empty() {
            return Err(EngineError::SelfTrain(format!(
                "cycle {cycle}: every title failed to generate"
            )));
        }

        let mut training = poems.clone();
        if let Some(k) = config.top_k_per_cycle {
            training.sort_by(|a, b| {
                b.breakdown
                    .total
                    .total_cmp(&a.breakdown.total)
                    .then_with(|| a.poem.cmp(&b.poem))
            });
            training.truncate(k.max(1));
        }
        let docs: Vec<TokenSeq> = training
            .iter()
            .map(|p| TokenSeq::from_text(&p.poem))
            .collect();
        current = current.fine_tune(&docs, config.fine_tune_weight)?;

        let n = poems.len() as f64;
        let report = CycleReport {
            cycle,
            n_generated: poems.len(),
            n_failed: failed,
            mean_total: poems.iter().map(|p| p.breakdown.total).sum::<f64>() / n,
            mean_format_penalty: poems.iter().map(|p| p.breakdown.format_penalty).sum::<f64>() / n,
            mean_prompt_overlap: poems
                .iter()
                .map(|p| prompt_token_overlap(&p.title, &TokenSeq::from_text(&p.poem)))
                .sum::<f64>()
                / n,
            poems,
        };
        reports.push(report);
    }

    Ok((current, reports))
}
