//! `validate-config`: check a run configuration end to end without running
//! anything, and print the resolved digest.

use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use inverse_decode::EngineError;

use crate::config::RunConfig;

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: PathBuf,
}

pub fn run(args: &ValidateArgs) -> Result<(), EngineError> {
    let mut config = RunConfig::load(&args.config)?;
    config.apply_seed_env()?;
    config.beam.rng_seed = config.seed;
    config.validate()?;
    let summary = json!({
        "valid": true,
        "config_hash": config.hash(),
        "template": config.template,
        "backend": serde_json::to_value(&config.model.backend).expect("backend serializes"),
        "mode": serde_json::to_value(&config.scorer.mode).expect("mode serializes"),
        "seed": config.seed,
    });
    println!("{summary}");
    Ok(())
}
