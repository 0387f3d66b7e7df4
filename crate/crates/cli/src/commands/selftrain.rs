//! `selftrain`: run the generate-and-fine-tune loop on the n-gram backend.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::Args;

use inverse_decode::prompt_transform::PromptFields;
use inverse_decode::self_training::{
    run_self_training, SelfTrainConfig, DEFAULT_MAX_CYCLES, DEFAULT_MAX_POEMS_PER_TITLE,
};
use inverse_decode::EngineError;

use crate::config::RunConfig;
use crate::record::CycleSummary;

#[derive(Debug, Args)]
pub struct SelftrainArgs {
    /// Run configuration file (ngram backend, inverse_poem scorer).
    #[arg(long)]
    pub config: PathBuf,
    /// JSONL titles file: one prompt-fields object per line.
    #[arg(long)]
    pub titles: PathBuf,
    /// Generate-and-fine-tune cycles.
    #[arg(long, default_value_t = 2)]
    pub cycles: usize,
    #[arg(long, default_value_t = 1)]
    pub poems_per_title: usize,
    /// Fine-tune count weight per generated poem.
    #[arg(long, default_value_t = 1.0)]
    pub weight: f64,
    /// Fine-tune only on the top-k poems of each cycle.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Seed override (flags beat INVERSE_DECODE_SEED and the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Where to write the fine-tuned model.
    #[arg(long)]
    pub out_model: Option<PathBuf>,
    /// Where to write generated poems (JSONL).
    #[arg(long)]
    pub poems_out: Option<PathBuf>,
    /// Where to write the per-cycle report (JSON array).
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

fn read_titles(path: &Path) -> Result<Vec<PromptFields>, EngineError> {
    let file = fs::File::open(path).map_err(|e| {
        EngineError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    let mut titles = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: PromptFields = serde_json::from_str(&line).map_err(|e| {
            EngineError::Config(format!("{}:{}: invalid title: {e}", path.display(), i + 1))
        })?;
        titles.push(fields);
    }
    if titles.is_empty() {
        return Err(EngineError::Config(format!(
            "titles file {} contains no titles",
            path.display()
        )));
    }
    Ok(titles)
}

pub fn run(args: &SelftrainArgs) -> Result<(), EngineError> {
    let mut config = RunConfig::load(&args.config)?;
    config.apply_seed_env()?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.beam.rng_seed = config.seed;
    let config_hash = config.hash();

    let titles = read_titles(&args.titles)?;
    let model = config.build_ngram_model()?;
    let format = config.build_format_scorer()?.ok_or_else(|| {
        EngineError::Config("self-training requires format_spec in the config".into())
    })?;
    let template = config.resolve_template()?;

    let self_train = SelfTrainConfig {
        titles,
        cycles: args.cycles,
        poems_per_title: args.poems_per_title,
        fine_tune_weight: args.weight,
        beam: config.beam.clone(),
        scorer: config.scorer.clone(),
        format_spec: format.spec.clone(),
        tables: format.tables.clone(),
        template,
        top_k_per_cycle: args.top_k,
        max_cycles: DEFAULT_MAX_CYCLES,
        max_poems_per_title: DEFAULT_MAX_POEMS_PER_TITLE,
    };

    let (final_model, reports) = run_self_training(&model, &self_train)?;

    if let Some(path) = &args.out_model {
        final_model.save_file(path)?;
    }
    if let Some(path) = &args.poems_out {
        let mut file = fs::File::create(path)?;
        for report in &reports {
            for poem in &report.poems {
                writeln!(
                    file,
                    "{}",
                    serde_json::to_string(poem).expect("poem serializes")
                )?;
            }
        }
    }

    let summaries: Vec<CycleSummary> = reports
        .iter()
        .map(|r| CycleSummary {
            cycle: r.cycle,
            n_generated: r.n_generated,
            n_failed: r.n_failed,
            mean_total: r.mean_total,
            mean_format_penalty: r.mean_format_penalty,
            mean_prompt_overlap: r.mean_prompt_overlap,
            config_hash: config_hash.clone(),
            seed: config.seed,
        })
        .collect();
    if let Some(path) = &args.report_out {
        fs::write(
            path,
            serde_json::to_string_pretty(&summaries).expect("report serializes"),
        )?;
    }
    for summary in &summaries {
        println!("{}", serde_json::to_string(summary).expect("summary serializes"));
    }
    Ok(())
}
