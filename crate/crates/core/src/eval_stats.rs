//! Evaluation statistics from human rating records.
//!
//! Summaries are per-capita: each evaluator's scores for a method are
//! averaged first, the method mean and sample standard deviation are then
//! computed over those evaluator means. Method comparisons use Welch's
//! one-sided two-sample t-test on the summary triples (mean, std, N),
//! treating evaluators as independent.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::EngineError;

/// One rating: an evaluator scored one method's output for one prompt under
/// one aspect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub evaluator_id: String,
    pub method: String,
    pub prompt_id: String,
    pub aspect: String,
    pub score: f64,
}

/// Hard bounds of the rating scales (1-5 and 1-10 aspects both fit).
const SCORE_MIN: f64 = 1.0;
const SCORE_MAX: f64 = 10.0;

/// Check score ranges and the uniqueness of
/// (evaluator, method, prompt, aspect).
pub fn validate_records(records: &[EvalRecord]) -> Result<(), EngineError> {
    let mut seen = BTreeSet::new();
    for (i, r) in records.iter().enumerate() {
        if !r.score.is_finite() || !(SCORE_MIN..=SCORE_MAX).contains(&r.score) {
            return Err(EngineError::config(format!(
                "record {i}: score {} outside [{SCORE_MIN}, {SCORE_MAX}]",
                r.score
            )));
        }
        let key = (
            r.evaluator_id.clone(),
            r.method.clone(),
            r.prompt_id.clone(),
            r.aspect.clone(),
        );
        if !seen.insert(key) {
            return Err(EngineError::config(format!(
                "record {i}: duplicate rating for ({}, {}, {}, {})",
                r.evaluator_id, r.method, r.prompt_id, r.aspect
            )));
        }
    }
    Ok(())
}

/// Per-method summary over evaluator means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean: f64,
    /// Sample standard deviation (n-1 denominator) of the evaluator means;
    /// 0 when only one evaluator is retained.
    pub per_capita_std: f64,
    pub n_evaluators: usize,
}

/// Summarize one aspect: per evaluator, average over prompts; per method,
/// mean and sample standard deviation over evaluator means. Evaluators
/// missing any method are excluded with a warning.
pub fn summarize(
    records: &[EvalRecord],
    aspect: &str,
) -> Result<(Vec<MethodSummary>, Vec<String>), EngineError> {
    validate_records(records)?;
    let relevant: Vec<&EvalRecord> = records.iter().filter(|r| r.aspect == aspect).collect();
    if relevant.is_empty() {
        return Err(EngineError::config(format!("no records for aspect `{aspect}`")));
    }
    let methods: BTreeSet<&str> = relevant.iter().map(|r| r.method.as_str()).collect();
    let mut by_evaluator: BTreeMap<&str, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for r in &relevant {
        by_evaluator
            .entry(r.evaluator_id.as_str())
            .or_default()
            .entry(r.method.as_str())
            .or_default()
            .push(r.score);
    }

    let mut warnings = Vec::new();
    let mut retained: BTreeMap<&str, &BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for (evaluator, per_method) in &by_evaluator {
        let missing: Vec<&str> = methods
            .iter()
            .filter(|m| !per_method.contains_key(**m))
            .copied()
            .collect();
        if missing.is_empty() {
            retained.insert(evaluator, per_method);
        } else {
            warnings.push(format!(
                "evaluator `{evaluator}` excluded: missing method(s) {}",
                missing.join(", ")
            ));
        }
    }
    if retained.is_empty() {
        return Err(EngineError::config(format!(
            "no evaluator covers every method for aspect `{aspect}`"
        )));
    }

    let mut summaries = Vec::new();
    for method in methods {
        let evaluator_means: Vec<f64> = retained
            .values()
            .map(|per_method| {
                let scores = &per_method[method];
                scores.iter().sum::<f64>() / scores.len() as f64
            })
            .collect();
        let n = evaluator_means.len();
        let mean = evaluator_means.iter().sum::<f64>() / n as f64;
        let std = if n >= 2 {
            let ss: f64 = evaluator_means.iter().map(|m| (m - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            warnings.push(format!(
                "method `{method}`: single evaluator, deviation undefined, reported as 0"
            ));
            0.0
        };
        summaries.push(MethodSummary {
            method: method.to_string(),
            mean,
            per_capita_std: std,
            n_evaluators: n,
        });
    }
    Ok((summaries, warnings))
}

/// One-sided Welch p-value for the hypothesis "A >= B": small values reject
/// it in favor of B being better. Uses the Welch t statistic
/// `(mean_b - mean_a) / sqrt(std_a^2/n_a + std_b^2/n_b)` with
/// Welch-Satterthwaite degrees of freedom and the upper tail of Student's t.
pub fn p_value_one_sided(
    mean_a: f64,
    std_a: f64,
    n_a: usize,
    mean_b: f64,
    std_b: f64,
    n_b: usize,
) -> Result<f64, EngineError> {
    if n_a < 2 || n_b < 2 {
        return Err(EngineError::config("both samples need n >= 2"));
    }
    if !(std_a >= 0.0) || !(std_b >= 0.0) || !std_a.is_finite() || !std_b.is_finite() {
        return Err(EngineError::config("standard deviations must be non-negative finite reals"));
    }
    if !mean_a.is_finite() || !mean_b.is_finite() {
        return Err(EngineError::config("means must be finite"));
    }
    let var_a = std_a * std_a / n_a as f64;
    let var_b = std_b * std_b / n_b as f64;
    let pooled = var_a + var_b;
    if pooled == 0.0 {
        // Degenerate populations: the comparison is decided by the means.
        return Ok(if mean_a == mean_b {
            0.5
        } else if mean_b > mean_a {
            0.0
        } else {
            1.0
        });
    }
    let t = (mean_b - mean_a) / pooled.sqrt();
    let df = pooled * pooled
        / (var_a * var_a / (n_a as f64 - 1.0) + var_b * var_b / (n_b as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| EngineError::config(format!("invalid t distribution: {e}")))?;
    Ok(1.0 - dist.cdf(t))
}

/// Pairwise comparison entry of the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub method_a: String,
    pub method_b: String,
    /// One-sided p-value for "method_a >= method_b".
    pub p_a_ge_b: f64,
}

/// Per-aspect report: method summaries plus all ordered pairwise
/// comparisons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AspectReport {
    pub aspect: String,
    pub methods: Vec<MethodSummary>,
    pub comparisons: Vec<Comparison>,
    pub warnings: Vec<String>,
}

/// Summarize an aspect and compare every ordered method pair.
pub fn build_report(records: &[EvalRecord], aspect: &str) -> Result<AspectReport, EngineError> {
    let (methods, warnings) = summarize(records, aspect)?;
    let mut comparisons = Vec::new();
    for a in &methods {
        for b in &methods {
            if a.method == b.method || a.n_evaluators < 2 || b.n_evaluators < 2 {
                continue;
            }
            comparisons.push(Comparison {
                method_a: a.method.clone(),
                method_b: b.method.clone(),
                p_a_ge_b: p_value_one_sided(
                    a.mean,
                    a.per_capita_std,
                    a.n_evaluators,
                    b.mean,
                    b.per_capita_std,
                    b.n_evaluators,
                )?,
            });
        }
    }
    Ok(AspectReport {
        aspect: aspect.to_string(),
        methods,
        comparisons,
        warnings,
    })
}

/// Read rating records from JSONL (one object per line) or CSV with headers
/// `evaluator_id,method,prompt_id,aspect,score`, chosen by file extension.
pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>, EngineError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_records_csv(path),
        _ => read_records_jsonl(path),
    }
}

pub fn read_records_jsonl(path: &Path) -> Result<Vec<EvalRecord>, EngineError> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EvalRecord = serde_json::from_str(&line).map_err(|e| {
            EngineError::config(format!("{}:{}: invalid record: {e}", path.display(), i + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn read_records_csv(path: &Path) -> Result<Vec<EvalRecord>, EngineError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => EngineError::Io(std::io::Error::other(format!(
            "{}: {e}",
            path.display()
        ))),
        _ => EngineError::config(format!("{}: {e}", path.display())),
    })?;
    let mut records = Vec::new();
    for (i, row) in reader.deserialize::<EvalRecord>().enumerate() {
        let record = row.map_err(|e| {
            EngineError::config(format!("{}: row {}: {e}", path.display(), i + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}
