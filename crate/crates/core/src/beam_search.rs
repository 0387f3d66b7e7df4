//! Sub-sentence beam search.
//!
//! The search keeps `n_beams` candidates alive. Each step, every live beam
//! is expanded by `m_expansions` sampled sub-sentence continuations (the
//! sampler stops at the first delimiter token), every candidate is scored
//! over its full accumulated text, and the global top `n_beams` by total
//! survive. Terminated beams stay in the pool and compete by score, so an
//! early finish can win. The loop ends after `max_steps` steps or when every
//! surviving beam has terminated.
//!
//! Exhaustive mode replaces sampling with single-token enumeration over the
//! backend vocabulary plus an end-event candidate per beam, which makes the
//! search equivalent to brute-force maximization of the scorer over all
//! enumerable sequences whenever `n_beams` is large enough — the oracle the
//! test suite leans on.
//!
//! Everything is deterministic: expansion seeds derive from
//! `(rng_seed, step, beam index)` via [`derive_seed`], ties break on the
//! rendered candidate text, and the full search trace serializes to JSONL
//! for offline audit.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::lm_core::{derive_seed, CharTokenizer, LanguageModel, TokenSeq};
use crate::prompt_transform::{PromptFields, TransformTemplate};
use crate::scoring::ScoreBreakdown;

/// How beams are expanded each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionMode {
    /// `m_expansions` sampled sub-sentence continuations per beam.
    #[default]
    Sampled,
    /// Every vocabulary token as a one-token extension, plus the end event.
    /// Requires a finite-vocabulary backend.
    Exhaustive,
}

/// Beam search parameters. The presets mirror the reference settings:
/// long-form QA runs 5 beams x 5 expansions x 30 sub-sentences, poem
/// generation runs 10 x 7 x 8 for training and 10 x 12 x 8 for evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeamParams {
    pub n_beams: usize,
    pub m_expansions: usize,
    /// Maximum number of sub-sentence steps.
    pub max_steps: usize,
    /// Token budget for a single sampled sub-sentence.
    pub max_step_tokens: usize,
    pub rng_seed: u64,
    /// Drop duplicate candidates within one beam's expansion. Duplicates can
    /// reduce the effective expansion count.
    pub dedup: bool,
    pub expansion_mode: ExpansionMode,
}

impl Default for BeamParams {
    fn default() -> Self {
        Self::long_form_qa()
    }
}

impl BeamParams {
    pub fn long_form_qa() -> Self {
        BeamParams {
            n_beams: 5,
            m_expansions: 5,
            max_steps: 30,
            max_step_tokens: 32,
            rng_seed: 0,
            dedup: true,
            expansion_mode: ExpansionMode::Sampled,
        }
    }

    pub fn poem_training() -> Self {
        BeamParams {
            n_beams: 10,
            m_expansions: 7,
            max_steps: 8,
            ..Self::long_form_qa()
        }
    }

    pub fn poem_eval() -> Self {
        BeamParams {
            n_beams: 10,
            m_expansions: 12,
            max_steps: 8,
            ..Self::long_form_qa()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.n_beams < 1 {
            return Err(EngineError::config("n_beams must be >= 1"));
        }
        if self.m_expansions < 1 {
            return Err(EngineError::config("m_expansions must be >= 1"));
        }
        if self.max_steps < 1 {
            return Err(EngineError::config("max_steps must be >= 1"));
        }
        if self.max_step_tokens < 1 {
            return Err(EngineError::config("max_step_tokens must be >= 1"));
        }
        Ok(())
    }
}

/// A candidate generation kept alive during search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Beam {
    pub text: TokenSeq,
    /// Terminated beams are never expanded; they competed to the end.
    pub terminated: bool,
    pub breakdown: ScoreBreakdown,
    /// Step at which this beam was produced.
    pub step: usize,
}

/// Incremental scoring state carried per beam. [`BeamScorer`] implementations
/// own its interpretation; the search only threads it from parent to child.
#[derive(Debug, Clone, Default)]
pub struct ScoreCache {
    /// Cumulative forward log-probability of the beam text given the prompt.
    pub forward_logprob: f64,
    /// Inverse values of delimiter-closed sub-sentences, in order.
    pub completed_inverse: Vec<f64>,
    /// Trailing sub-sentence not yet closed by a delimiter.
    pub open_sub: TokenSeq,
}

/// Scores beam extensions. `score_extension` must be pure: the same parent
/// state and delta always produce the same breakdown.
pub trait BeamScorer: Sync {
    /// Sub-sentence delimiters; beam expansion uses them as sampling stops.
    fn delimiters(&self) -> &BTreeSet<String>;

    /// Score `parent_text + delta` given the parent's cached state, returning
    /// the breakdown and the child's state.
    fn score_extension(
        &self,
        parent_cache: &ScoreCache,
        parent_text: &TokenSeq,
        delta: &TokenSeq,
    ) -> Result<(ScoreBreakdown, ScoreCache), EngineError>;
}

/// One candidate produced by expanding a beam.
#[derive(Debug, Clone)]
pub struct Expansion {
    /// Newly produced tokens (may be empty when the end event fired first).
    pub delta: TokenSeq,
    /// Parent text plus delta.
    pub text: TokenSeq,
    pub terminated: bool,
}

/// Expand one live beam into candidate continuations.
///
/// Sampled mode draws `m_expansions` sub-sentence samples; a candidate whose
/// sample ends with a delimiter stays live, anything else (end event or token
/// budget) terminates it. Exhaustive mode enumerates every vocabulary token
/// as a live one-token extension plus one end-event candidate.
pub fn expand_beam(
    model: &dyn LanguageModel,
    prompt: &TokenSeq,
    beam_text: &TokenSeq,
    beam_terminated: bool,
    params: &BeamParams,
    delimiters: &BTreeSet<String>,
    seed: u64,
) -> Result<Vec<Expansion>, EngineError> {
    if beam_terminated {
        return Err(EngineError::config("cannot expand a terminated beam"));
    }
    let prefix = prompt.concat(beam_text);
    let mut expansions = Vec::new();
    match params.expansion_mode {
        ExpansionMode::Sampled => {
            let deltas = model.sample_n(
                &prefix,
                delimiters,
                params.max_step_tokens,
                params.m_expansions,
                seed,
            )?;
            for delta in deltas {
                let ends_with_delimiter = delta
                    .tokens()
                    .last()
                    .is_some_and(|t| delimiters.contains(t));
                expansions.push(Expansion {
                    text: beam_text.concat(&delta),
                    terminated: !ends_with_delimiter,
                    delta,
                });
            }
        }
        ExpansionMode::Exhaustive => {
            let vocab = model.finite_vocab().ok_or_else(|| {
                EngineError::config("exhaustive expansion requires a finite-vocabulary backend")
            })?;
            if !beam_text.is_empty() {
                expansions.push(Expansion {
                    delta: TokenSeq::new(),
                    text: beam_text.clone(),
                    terminated: true,
                });
            }
            for token in vocab {
                let delta = TokenSeq::from_tokens([token.clone()])?;
                expansions.push(Expansion {
                    text: beam_text.concat(&delta),
                    terminated: false,
                    delta,
                });
            }
        }
    }
    if params.dedup {
        let mut seen: BTreeSet<(String, bool)> = BTreeSet::new();
        expansions.retain(|e| seen.insert((e.text.render(), e.terminated)));
    }
    Ok(expansions)
}

/// One candidate as recorded in the step trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTrace {
    /// Index of the parent in the previous beam list.
    pub parent: usize,
    pub text: String,
    pub terminated: bool,
    /// True for terminated beams carried over rather than expanded.
    pub carryover: bool,
    /// True if the candidate survived selection.
    pub selected: bool,
    pub breakdown: Option<ScoreBreakdown>,
    pub error: Option<String>,
}

/// All candidates considered at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub candidates: Vec<CandidateTrace>,
}

/// Full search log: one record per step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchTrace {
    pub steps: Vec<StepTrace>,
}

impl SearchTrace {
    /// Write the trace as JSONL, one step record per line.
    pub fn write_jsonl(&self, mut writer: impl Write) -> std::io::Result<()> {
        for step in &self.steps {
            let line = serde_json::to_string(step).expect("trace serialization cannot fail");
            writeln!(writer, "{line}")?;
        }
        Ok(())
    }
}

/// Result of a beam search run.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: Beam,
    /// Final beams in rank order (best first).
    pub all_final: Vec<Beam>,
    pub trace: SearchTrace,
}

struct SearchBeam {
    text: TokenSeq,
    rendered: String,
    terminated: bool,
    step: usize,
    breakdown: ScoreBreakdown,
    cache: ScoreCache,
}

impl SearchBeam {
    fn to_public(&self) -> Beam {
        Beam {
            text: self.text.clone(),
            terminated: self.terminated,
            breakdown: self.breakdown.clone(),
            step: self.step,
        }
    }
}

/// Run beam search for the prompt rendered from `template` and `fields`.
///
/// Candidates are ranked by `breakdown.total`, ties broken lexicographically
/// by rendered text (then terminated-first) for cross-platform determinism.
pub fn run_beam_search(
    model: &dyn LanguageModel,
    template: &TransformTemplate,
    fields: &PromptFields,
    params: &BeamParams,
    scorer: &dyn BeamScorer,
) -> Result<SearchOutcome, EngineError> {
    params.validate()?;
    let prompt = template.render_forward(fields, &CharTokenizer)?;
    let delimiters = scorer.delimiters().clone();

    // The root beam is a placeholder: it is expanded at step 1 and never
    // ranked, so its breakdown never competes.
    let root = SearchBeam {
        text: TokenSeq::new(),
        rendered: String::new(),
        terminated: false,
        step: 0,
        breakdown: ScoreBreakdown {
            inverse_term: 0.0,
            forward_term: 0.0,
            format_penalty: 0.0,
            total: f64::NEG_INFINITY,
            n_subsentences: 0,
            n_tokens: 0,
        },
        cache: ScoreCache::default(),
    };
    let mut beams: Vec<SearchBeam> = vec![root];
    let mut trace = SearchTrace::default();

    let mut step = 0;
    while step < params.max_steps && beams.iter().any(|b| !b.terminated) {
        step += 1;
        let mut step_trace = StepTrace {
            step,
            candidates: Vec::new(),
        };
        // (beam, index of its trace record) so selection can be marked.
        let mut pool: Vec<(SearchBeam, usize)> = Vec::new();

        for (parent_idx, beam) in beams.iter().enumerate() {
            if beam.terminated {
                step_trace.candidates.push(CandidateTrace {
                    parent: parent_idx,
                    text: beam.rendered.clone(),
                    terminated: true,
                    carryover: true,
                    selected: false,
                    breakdown: Some(beam.breakdown.clone()),
                    error: None,
                });
                pool.push((
                    SearchBeam {
                        text: beam.text.clone(),
                        rendered: beam.rendered.clone(),
                        terminated: true,
                        step: beam.step,
                        breakdown: beam.breakdown.clone(),
                        cache: beam.cache.clone(),
                    },
                    step_trace.candidates.len() - 1,
                ));
                continue;
            }

            let seed = derive_seed(params.rng_seed, &[step as u64, parent_idx as u64]);
            let expansions = expand_beam(
                model,
                &prompt,
                &beam.text,
                beam.terminated,
                params,
                &delimiters,
                seed,
            )?;
            for expansion in expansions {
                match scorer.score_extension(&beam.cache, &beam.text, &expansion.delta) {
                    Ok((breakdown, cache)) => {
                        let rendered = expansion.text.render();
                        step_trace.candidates.push(CandidateTrace {
                            parent: parent_idx,
                            text: rendered.clone(),
                            terminated: expansion.terminated,
                            carryover: false,
                            selected: false,
                            breakdown: Some(breakdown.clone()),
                            error: None,
                        });
                        pool.push((
                            SearchBeam {
                                text: expansion.text,
                                rendered,
                                terminated: expansion.terminated,
                                step,
                                breakdown,
                                cache,
                            },
                            step_trace.candidates.len() - 1,
                        ));
                    }
                    // Candidates that violate scoring preconditions (e.g. an
                    // empty generation after an immediate end event) drop out
                    // of the pool but stay on the record.
                    Err(EngineError::Score(message)) => {
                        step_trace.candidates.push(CandidateTrace {
                            parent: parent_idx,
                            text: expansion.text.render(),
                            terminated: expansion.terminated,
                            carryover: false,
                            selected: false,
                            breakdown: None,
                            error: Some(message),
                        });
                    }
                    Err(other) => return Err(other),
                }
            }
        }

        if pool.is_empty() {
            trace.steps.push(step_trace);
            return Err(EngineError::Search {
                message: format!("no scorable candidate at step {step}"),
                trace: Box::new(trace),
            });
        }

        pool.sort_by(|a, b| {
            b.0.breakdown
                .total
                .total_cmp(&a.0.breakdown.total)
                .then_with(|| a.0.rendered.cmp(&b.0.rendered))
                .then_with(|| b.0.terminated.cmp(&a.0.terminated))
        });
        pool.truncate(params.n_beams);
        for (_, trace_idx) in &pool {
            step_trace.candidates[*trace_idx].selected = true;
        }
        beams = pool.into_iter().map(|(beam, _)| beam).collect();
        trace.steps.push(step_trace);
    }

    let all_final: Vec<Beam> = beams.iter().map(SearchBeam::to_public).collect();
    let best = all_final[0].clone();
    Ok(SearchOutcome {
        best,
        all_final,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm_core::NGramModel;
    use crate::prompt_transform::{builtin_templates, find_template};
    use crate::scoring::{CompositeScorer, ScorerConfig};

    fn corpus(texts: &[&str]) -> Vec<TokenSeq> {
        texts.iter().map(|t| TokenSeq::from_text(t)).collect()
    }

    fn qa() -> &'static TransformTemplate {
        find_template(builtin_templates(), "qa-en").unwrap()
    }

    fn toy_model() -> NGramModel {
        NGramModel::train(&corpus(&["ab，ba。ab。", "ba，ab，", "bb。aa。"]), 2, 0.5).unwrap()
    }

    fn toy_scorer_config() -> ScorerConfig {
        ScorerConfig {
            delimiters: ["，", "。"].into_iter().map(String::from).collect(),
            ..ScorerConfig::qa_defaults()
        }
    }

    #[test]
    fn greedy_sampled_decode_matches_manual_chain() {
        let model = toy_model();
        let fields = PromptFields::new().with("question", "ab");
        let config = toy_scorer_config();
        let scorer = CompositeScorer::new(&model, qa(), &fields, config.clone(), None).unwrap();
        let params = BeamParams {
            n_beams: 1,
            m_expansions: 1,
            max_steps: 4,
            max_step_tokens: 6,
            rng_seed: 5,
            dedup: true,
            expansion_mode: ExpansionMode::Sampled,
        };
        let outcome = run_beam_search(&model, qa(), &fields, &params, &scorer).unwrap();

        // Reference re-implementation: chain sample_n manually with the
        // documented seed derivation.
        let prompt = qa()
            .render_forward(&fields, &CharTokenizer)
            .unwrap();
        let mut text = TokenSeq::new();
        for step in 1..=params.max_steps as u64 {
            let seed = derive_seed(params.rng_seed, &[step, 0]);
            let delta = model
                .sample_n(&prompt.concat(&text), scorer.delimiters(), params.max_step_tokens, 1, seed)
                .unwrap()
                .remove(0);
            text.extend(&delta);
            let live = delta
                .tokens()
                .last()
                .is_some_and(|t| scorer.delimiters().contains(t));
            if !live {
                break;
            }
        }
        assert_eq!(outcome.best.text, text);
    }

    #[test]
    fn exhaustive_search_matches_brute_force() {
        let model = NGramModel::train(&corpus(&["ab", "ba", "aab"]), 2, 1.0).unwrap();
        let fields = PromptFields::new().with("question", "b");
        let config = toy_scorer_config();
        let scorer = CompositeScorer::new(&model, qa(), &fields, config, None).unwrap();
        let params = BeamParams {
            n_beams: 64,
            m_expansions: 1,
            max_steps: 3,
            max_step_tokens: 1,
            rng_seed: 0,
            dedup: true,
            expansion_mode: ExpansionMode::Exhaustive,
        };
        let outcome = run_beam_search(&model, qa(), &fields, &params, &scorer).unwrap();

        // Brute force over every non-empty sequence of <= max_steps tokens.
        let vocab: Vec<String> = model.finite_vocab().unwrap().iter().cloned().collect();
        let mut best: Option<(f64, String)> = None;
        let mut stack: Vec<Vec<String>> = vocab.iter().map(|t| vec![t.clone()]).collect();
        while let Some(tokens) = stack.pop() {
            let seq = TokenSeq::from_tokens(tokens.clone()).unwrap();
            let total = scorer.score(&seq).unwrap().total;
            let rendered = seq.render();
            let better = match &best {
                None => true,
                Some((bt, btext)) => {
                    total > *bt || (total == *bt && rendered < *btext)
                }
            };
            if better {
                best = Some((total, rendered));
            }
            if tokens.len() < params.max_steps {
                for t in &vocab {
                    let mut next = tokens.clone();
                    next.push(t.clone());
                    stack.push(next);
                }
            }
        }
        let (best_total, best_text) = best.unwrap();
        assert_eq!(outcome.best.breakdown.total.to_bits(), best_total.to_bits());
        assert_eq!(outcome.best.text.render(), best_text);
    }

    #[test]
    fn dedup_collapses_identical_candidates() {
        // Degenerate model: the delimiter is forced, so all samples agree.
        let forced: Vec<TokenSeq> = (0..5000).map(|_| TokenSeq::from_text("。")).collect();
        let model = NGramModel::train(&forced, 2, 1e-9).unwrap();
        let params = BeamParams {
            n_beams: 4,
            m_expansions: 3,
            max_steps: 1,
            max_step_tokens: 4,
            rng_seed: 1,
            dedup: true,
            expansion_mode: ExpansionMode::Sampled,
        };
        let delims: BTreeSet<String> = ["。".to_string()].into();
        let prompt = TokenSeq::from_text("x");
        let expansions = expand_beam(&model, &prompt, &TokenSeq::new(), false, &params, &delims, 9).unwrap();
        assert_eq!(expansions.len(), 1);

        let without = BeamParams {
            dedup: false,
            ..params
        };
        let expansions = expand_beam(&model, &prompt, &TokenSeq::new(), false, &without, &delims, 9).unwrap();
        assert_eq!(expansions.len(), 3);
    }

    #[test]
    fn expanding_a_terminated_beam_is_an_error() {
        let model = toy_model();
        let params = BeamParams::default();
        let delims = crate::prompt_transform::default_delimiters();
        let err = expand_beam(
            &model,
            &TokenSeq::from_text("p"),
            &TokenSeq::from_text("ab"),
            true,
            &params,
            &delims,
            0,
        );
        assert!(matches!(err, Err(EngineError::Config(_))));
    }

    #[test]
    fn expansions_extend_the_parent_text() {
        let model = toy_model();
        let params = BeamParams {
            m_expansions: 5,
            dedup: false,
            ..BeamParams::default()
        };
        let delims: BTreeSet<String> = ["，", "。"].into_iter().map(String::from).collect();
        let parent = TokenSeq::from_text("ab，");
        let expansions = expand_beam(
            &model,
            &TokenSeq::from_text("p"),
            &parent,
            false,
            &params,
            &delims,
            3,
        )
        .unwrap();
        assert_eq!(expansions.len(), 5);
        for e in &expansions {
            assert!(e.text.render().starts_with(&parent.render()));
            assert_eq!(e.text.len(), parent.len() + e.delta.len());
        }
    }

    #[test]
    fn beam_count_never_exceeds_n_beams() {
        let model = toy_model();
        let fields = PromptFields::new().with("question", "ab");
        let scorer =
            CompositeScorer::new(&model, qa(), &fields, toy_scorer_config(), None).unwrap();
        let params = BeamParams {
            n_beams: 3,
            m_expansions: 4,
            max_steps: 5,
            max_step_tokens: 4,
            rng_seed: 11,
            dedup: true,
            expansion_mode: ExpansionMode::Sampled,
        };
        let outcome = run_beam_search(&model, qa(), &fields, &params, &scorer).unwrap();
        assert!(outcome.all_final.len() <= 3);
        for step in &outcome.trace.steps {
            let selected = step.candidates.iter().filter(|c| c.selected).count();
            assert!(selected <= 3);
        }
    }

    #[test]
    fn identical_runs_produce_identical_traces() {
        let model = toy_model();
        let fields = PromptFields::new().with("question", "ab");
        let scorer =
            CompositeScorer::new(&model, qa(), &fields, toy_scorer_config(), None).unwrap();
        let params = BeamParams {
            n_beams: 3,
            m_expansions: 3,
            max_steps: 4,
            max_step_tokens: 5,
            rng_seed: 21,
            dedup: true,
            expansion_mode: ExpansionMode::Sampled,
        };
        let a = run_beam_search(&model, qa(), &fields, &params, &scorer).unwrap();
        let b = run_beam_search(&model, qa(), &fields, &params, &scorer).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.best.text, b.best.text);
        let mut buf_a = Vec::new();
        a.trace.write_jsonl(&mut buf_a).unwrap();
        let mut buf_b = Vec::new();
        b.trace.write_jsonl(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
    }

    #[test]
    fn beam_texts_extend_monotonically() {
        let model = toy_model();
        let fields = PromptFields::new().with("question", "ab");
        let scorer =
            CompositeScorer::new(&model, qa(), &fields, toy_scorer_config(), None).unwrap();
        let params = BeamParams {
            n_beams: 2,
            m_expansions: 3,
            max_steps: 4,
            max_step_tokens: 5,
            rng_seed: 33,
            dedup: true,
            expansion_mode: ExpansionMode::Sampled,
        };
        let outcome = run_beam_search(&model, qa(), &fields, &params, &scorer).unwrap();
        // Every selected candidate's text extends its parent's text from the
        // previous step.
        let mut previous: Vec<String> = vec![String::new()];
        for step in &outcome.trace.steps {
            let mut current = Vec::new();
            for candidate in step.candidates.iter().filter(|c| c.selected) {
                assert!(
                    candidate.text.starts_with(&previous[candidate.parent]),
                    "step {} candidate does not extend its parent",
                    step.step
                );
                current.push(candidate.text.clone());
            }
            previous = current;
        }
    }

    struct ShiftedScorer<'a> {
        inner: &'a dyn BeamScorer,
        shift: f64,
    }

    impl BeamScorer for ShiftedScorer<'_> {
        fn delimiters(&self) -> &BTreeSet<String> {
            self.inner.delimiters()
        }

        fn score_extension(
            &self,
            parent_cache: &ScoreCache,
            parent_text: &TokenSeq,
            delta: &TokenSeq,
        ) -> Result<(ScoreBreakdown, ScoreCache), EngineError> {
            let (mut breakdown, cache) = self.inner.score_extension(parent_cache, parent_text, delta)?;
            breakdown.total += self.shift;
            Ok((breakdown, cache))
        }
    }

    #[test]
    fn constant_score_shift_preserves_selection() {
        let model = toy_model();
        let fields = PromptFields::new().with("question", "ab");
        let scorer =
            CompositeScorer::new(&model, qa(), &fields, toy_scorer_config(), None).unwrap();
        let shifted = ShiftedScorer {
            inner: &scorer,
            shift: 17.5,
        };
        let params = BeamParams {
            n_beams: 3,
            m_expansions: 3,
            max_steps: 4,
            max_step_tokens: 5,
            rng_seed: 55,
            dedup: true,
            expansion_mode: ExpansionMode::Sampled,
        };
        let plain = run_beam_search(&model, qa(), &fields, &params, &scorer).unwrap();
        let moved = run_beam_search(&model, qa(), &fields, &params, &shifted).unwrap();
        assert_eq!(plain.best.text, moved.best.text);
        let texts = |o: &SearchOutcome| {
            o.all_final
                .iter()
                .map(|b| b.text.render())
                .collect::<Vec<_>>()
        };
        assert_eq!(texts(&plain), texts(&moved));
    }

    struct FailingScorer(BTreeSet<String>);

    impl BeamScorer for FailingScorer {
        fn delimiters(&self) -> &BTreeSet<String> {
            &self.0
        }

        fn score_extension(
            &self,
            _parent_cache: &ScoreCache,
            _parent_text: &TokenSeq,
            _delta: &TokenSeq,
        ) -> Result<(ScoreBreakdown, ScoreCache), EngineError> {
            Err(EngineError::score("nothing is scorable"))
        }
    }

    #[test]
    fn all_candidates_failing_is_a_search_error_with_trace() {
        let model = toy_model();
        let fields = PromptFields::new().with("question", "ab");
        let scorer = FailingScorer(crate::prompt_transform::default_delimiters());
        let params = BeamParams {
            n_beams: 2,
            m_expansions: 2,
            max_steps: 3,
            max_step_tokens: 4,
            rng_seed: 7,
            dedup: true,
            expansion_mode: ExpansionMode::Sampled,
        };
        match run_beam_search(&model, qa(), &fields, &params, &scorer) {
            Err(EngineError::Search { trace, .. }) => {
                assert_eq!(trace.steps.len(), 1);
                assert!(trace.steps[0].candidates.iter().all(|c| c.error.is_some()));
            }
            other => panic!("expected search error, got {other:?}"),
        }
    }

    #[test]
    fn exhaustive_mode_needs_a_finite_vocabulary() {
        struct OpaqueModel;
        impl LanguageModel for OpaqueModel {
            fn identity(&self) -> String {
                "opaque".into()
            }
            fn logprob_from(
                &self,
                acc: f64,
                _prefix: &TokenSeq,
                _continuation: &TokenSeq,
            ) -> Result<f64, EngineError> {
                Ok(acc)
            }
            fn sample_continuation(
                &self,
                _prefix: &TokenSeq,
                _stop: &BTreeSet<String>,
                _max_tokens: usize,
                _seed: u64,
            ) -> Result<TokenSeq, EngineError> {
                Ok(TokenSeq::new())
            }
        }
        let params = BeamParams {
            expansion_mode: ExpansionMode::Exhaustive,
            ..BeamParams::default()
        };
        let delims = crate::prompt_transform::default_delimiters();
        let err = expand_beam(
            &OpaqueModel,
            &TokenSeq::new(),
            &TokenSeq::new(),
            false,
            &params,
            &delims,
            0,
        );
        assert!(matches!(err, Err(EngineError::Config(_))));
    }

    #[test]
    fn param_presets_match_reference_rows() {
        let qa = BeamParams::long_form_qa();
        assert_eq!((qa.n_beams, qa.m_expansions, qa.max_steps), (5, 5, 30));
        let train = BeamParams::poem_training();
        assert_eq!((train.n_beams, train.m_expansions, train.max_steps), (10, 7, 8));
        let eval = BeamParams::poem_eval();
        assert_eq!((eval.n_beams, eval.m_expansions, eval.max_steps), (10, 12, 8));
        assert!(BeamParams { n_beams: 0, ..qa }.validate().is_err());
    }
}
