//! `generate`: run beam search for one prompt and emit a generation record.

use std::fs;
use std::path::PathBuf;

use clap::Args;

use inverse_decode::beam_search::run_beam_search;
use inverse_decode::prompt_transform::PromptFields;
use inverse_decode::scoring::{CompositeScorer, ScoreMode};
use inverse_decode::EngineError;

use crate::config::RunConfig;
use crate::record::GenerationRecord;

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Run configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Prompt field as NAME=VALUE; repeatable, overrides --fields-json.
    #[arg(long = "field", value_name = "NAME=VALUE")]
    pub fields: Vec<String>,
    /// All prompt fields as one JSON object.
    #[arg(long)]
    pub fields_json: Option<String>,
    /// Template name override.
    #[arg(long)]
    pub template: Option<String>,
    /// Scorer mode override: baseline, inverse_qa, or inverse_poem.
    #[arg(long)]
    pub mode: Option<String>,
    /// Seed override (flags beat INVERSE_DECODE_SEED and the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the record to this file.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write the step-by-step search trace (JSONL) to this file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Pretty-print the record instead of emitting one JSONL line.
    #[arg(long)]
    pub pretty: bool,
}

pub fn parse_mode(value: &str) -> Result<ScoreMode, EngineError> {
    match value {
        "baseline" => Ok(ScoreMode::Baseline),
        "inverse_qa" => Ok(ScoreMode::InverseQa),
        "inverse_poem" => Ok(ScoreMode::InversePoem),
        other => Err(EngineError::Config(format!(
            "unknown mode `{other}` (expected baseline, inverse_qa, or inverse_poem)"
        ))),
    }
}

pub fn parse_field(pair: &str) -> Result<(String, String), EngineError> {
    pair.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| EngineError::Config(format!("--field `{pair}` is not NAME=VALUE")))
}

/// Resolve the configuration with all overrides applied, ready for hashing.
fn resolve_config(args: &GenerateArgs) -> Result<RunConfig, EngineError> {
    let mut config = RunConfig::load(&args.config)?;
    config.apply_seed_env()?;
    if let Some(template) = &args.template {
        config.template = template.clone();
    }
    if let Some(mode) = &args.mode {
        config.scorer.mode = parse_mode(mode)?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(output) = &args.output {
        config.output = Some(output.clone());
    }
    if let Some(trace) = &args.trace {
        config.trace = Some(trace.clone());
    }
    config.beam.rng_seed = config.seed;
    Ok(config)
}

fn resolve_fields(args: &GenerateArgs) -> Result<PromptFields, EngineError> {
    let mut fields: PromptFields = match &args.fields_json {
        Some(json) => serde_json::from_str(json)
            .map_err(|e| EngineError::Config(format!("invalid --fields-json: {e}")))?,
        None => PromptFields::new(),
    };
    for pair in &args.fields {
        let (name, value) = parse_field(pair)?;
        fields.set(name, value);
    }
    if fields.is_empty() {
        return Err(EngineError::Config(
            "no prompt fields given (use --field or --fields-json)".into(),
        ));
    }
    Ok(fields)
}

pub fn run(args: &GenerateArgs) -> Result<(), EngineError> {
    let config = resolve_config(args)?;
    let config_hash = config.hash();
    let fields = resolve_fields(args)?;
    let template = config.resolve_template()?;
    let model = config.build_model()?;
    let format = config.build_format_scorer()?;
    let scorer = CompositeScorer::new(
        model.as_ref(),
        &template,
        &fields,
        config.scorer.clone(),
        format,
    )?;

    let outcome = match run_beam_search(model.as_ref(), &template, &fields, &config.beam, &scorer)
    {
        Ok(outcome) => outcome,
        Err(EngineError::Search { message, trace }) => {
            // Persist the partial trace so the failure can be audited.
            if let Some(path) = &config.trace {
                let file = fs::File::create(path)?;
                trace.write_jsonl(file)?;
                log::error!("search failed; trace written to {}", path.display());
            }
            return Err(EngineError::Search { message, trace });
        }
        Err(other) => return Err(other),
    };

    let trace_path = match &config.trace {
        Some(path) => {
            let file = fs::File::create(path)?;
            outcome.trace.write_jsonl(file)?;
            Some(path.display().to_string())
        }
        None => None,
    };

    let record = GenerationRecord {
        prompt_fields: fields,
        text: outcome.best.text.render(),
        breakdown: outcome.best.breakdown,
        trace_path,
        config_hash,
        seed: config.seed,
    };
    let line = if args.pretty {
        serde_json::to_string_pretty(&record).expect("record serializes")
    } else {
        serde_json::to_string(&record).expect("record serializes")
    };
    println!("{line}");
    if let Some(path) = &config.output {
        fs::write(path, format!("{}\n", serde_json::to_string(&record).expect("record serializes")))?;
    }
    Ok(())
}
