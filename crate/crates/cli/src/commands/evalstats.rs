//! `evalstats`: per-capita summaries and one-sided Welch comparisons from a
//! rating records file.

use std::fs;
use std::path::PathBuf;

use clap::Args;

use inverse_decode::eval_stats::{build_report, read_records};
use inverse_decode::EngineError;

#[derive(Debug, Args)]
pub struct EvalstatsArgs {
    /// Records file: JSONL objects or CSV with headers
    /// evaluator_id,method,prompt_id,aspect,score.
    #[arg(long)]
    pub records: PathBuf,
    /// Aspect to summarize, e.g. overall.
    #[arg(long)]
    pub aspect: String,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub pretty: bool,
}

pub fn run(args: &EvalstatsArgs) -> Result<(), EngineError> {
    let records = read_records(&args.records)?;
    let report = build_report(&records, &args.aspect)?;
    let rendered = if args.pretty {
        serde_json::to_string_pretty(&report).expect("report serializes")
    } else {
        serde_json::to_string(&report).expect("report serializes")
    };
    println!("{rendered}");
    if let Some(path) = &args.out {
        fs::write(path, format!("{rendered}\n"))?;
    }
    Ok(())
}
