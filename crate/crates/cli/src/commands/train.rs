//! `train`: fit the n-gram backend on a JSONL corpus.

use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use inverse_decode::lm_core::{read_corpus_jsonl, CharTokenizer, LanguageModel, NGramModel};
use inverse_decode::EngineError;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// UTF-8 JSONL corpus, one {"text": string} object per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// N-gram order (context length + 1).
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Additive smoothing constant.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Where to write the model file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &TrainArgs) -> Result<(), EngineError> {
    let corpus = read_corpus_jsonl(&args.corpus, &CharTokenizer)?;
    let model = NGramModel::train(&corpus, args.order, args.alpha)?;
    model.save_file(&args.out)?;
    let summary = json!({
        "model": args.out.display().to_string(),
        "identity": model.identity(),
        "documents": corpus.len(),
        "vocab": model.vocab().len(),
    });
    println!("{summary}");
    Ok(())
}
