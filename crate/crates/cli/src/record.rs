//! Output record schemas. Every record embeds the resolved config hash and
//! the seed, so a run can be reproduced exactly from the record plus the
//! model file.

use serde::Serialize;

use inverse_decode::prompt_transform::PromptFields;
use inverse_decode::scoring::ScoreBreakdown;

/// One generation, emitted as a single JSONL line.
#[derive(Debug, Clone, Serialize)]
pub struct GenerationRecord {
    pub prompt_fields: PromptFields,
    pub text: String,
    pub breakdown: ScoreBreakdown,
    pub trace_path: Option<String>,
    pub config_hash: String,
    pub seed: u64,
}

/// Per-cycle self-training metrics, without the poem payloads (those go to
/// their own JSONL file).
#[derive(Debug, Clone, Serialize)]
pub struct CycleSummary {
    pub cycle: usize,
    pub n_generated: usize,
    pub n_failed: usize,
    pub mean_total: f64,
    pub mean_format_penalty: f64,
    pub mean_prompt_overlap: f64,
    pub config_hash: String,
    pub seed: u64,
}
