//! Run configuration: one JSON file fully determines a run, with flag and
//! environment overrides layered on top (flags > environment > config file >
//! defaults). The resolved configuration hashes to a stable digest that is
//! embedded in every output record.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use inverse_decode::beam_search::BeamParams;
use inverse_decode::lm_client::{RemoteEndpoint, RemoteModel};
use inverse_decode::lm_core::{LanguageModel, NGramModel, UniformModel};
use inverse_decode::poem_format::{FormatScorer, PoemFormatSpec, RhymeToneTables};
use inverse_decode::prompt_transform::{
    builtin_templates, find_template, load_template_pack, TransformTemplate,
};
use inverse_decode::scoring::{ScoreMode, ScorerConfig};
use inverse_decode::EngineError;

/// Environment variable overriding the run seed.
pub const SEED_ENV: &str = "INVERSE_DECODE_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Uniform,
    Ngram,
    Remote,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub backend: Backend,
    /// Model file for the ngram backend.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Vocabulary for the uniform backend.
    #[serde(default)]
    pub vocab: Option<Vec<String>>,
    /// Endpoint for the remote backend.
    #[serde(default)]
    pub endpoint: Option<RemoteEndpoint>,
    /// Sampling temperature for the ngram backend.
    #[serde(default)]
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default = "default_template")]
    pub template: String,
    /// Optional template pack replacing the built-in one.
    #[serde(default)]
    pub templates_file: Option<PathBuf>,
    #[serde(default)]
    pub scorer: ScorerConfig,
    #[serde(default)]
    pub beam: BeamParams,
    /// Poem format spec file, required in inverse_poem mode.
    #[serde(default)]
    pub format_spec: Option<PathBuf>,
    /// Rhyme/tone tables file; empty tables when absent.
    #[serde(default)]
    pub rhyme_tables: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub trace: Option<PathBuf>,
}

fn default_template() -> String {
    "qa-en".to_string()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let json = fs::read_to_string(path).map_err(|e| {
            EngineError::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        serde_json::from_str(&json)
            .map_err(|e| EngineError::Config(format!("invalid config {}: {e}", path.display())))
    }

    /// Apply the `INVERSE_DECODE_SEED` override when set. Returns an error on
    /// an unparsable value rather than silently ignoring it.
    pub fn apply_seed_env(&mut self) -> Result<(), EngineError> {
        if let Ok(value) = std::env::var(SEED_ENV) {
            if !value.is_empty() {
                let seed: u64 = value.parse().map_err(|_| {
                    EngineError::Config(format!("{SEED_ENV}=`{value}` is not a valid seed"))
                })?;
                self.seed = seed;
            }
        }
        Ok(())
    }

    /// Stable digest of the resolved configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(digest)
    }

    /// Template pack: the built-ins or the configured file.
    pub fn template_pack(&self) -> Result<Vec<TransformTemplate>, EngineError> {
        match &self.templates_file {
            Some(path) => load_template_pack(path),
            None => Ok(builtin_templates().to_vec()),
        }
    }

    pub fn resolve_template(&self) -> Result<TransformTemplate, EngineError> {
        let pack = self.template_pack()?;
        Ok(find_template(&pack, &self.template)?.clone())
    }

    /// Build the configured backend.
    pub fn build_model(&self) -> Result<Box<dyn LanguageModel>, EngineError> {
        match self.model.backend {
            Backend::Ngram => {
                let path = self.model.path.as_ref().ok_or_else(|| {
                    EngineError::Config("ngram backend needs model.path".into())
                })?;
                let mut model = NGramModel::load_file(path)?;
                if let Some(t) = self.model.temperature {
                    model = model.with_temperature(t)?;
                }
                Ok(Box::new(model))
            }
            Backend::Uniform => {
                let vocab = self.model.vocab.as_ref().ok_or_else(|| {
                    EngineError::Config("uniform backend needs model.vocab".into())
                })?;
                Ok(Box::new(UniformModel::new(vocab.iter().cloned())?))
            }
            Backend::Remote => {
                let endpoint = self.model.endpoint.clone().ok_or_else(|| {
                    EngineError::Config("remote backend needs model.endpoint".into())
                })?;
                Ok(Box::new(RemoteModel::new(endpoint.with_env_override())?))
            }
        }
    }

    /// Load the ngram model directly (self-training mutates counts).
    pub fn build_ngram_model(&self) -> Result<NGramModel, EngineError> {
        if self.model.backend != Backend::Ngram {
            return Err(EngineError::Config(
                "this command requires the ngram backend".into(),
            ));
        }
        let path = self
            .model
            .path
            .as_ref()
            .ok_or_else(|| EngineError::Config("ngram backend needs model.path".into()))?;
        let mut model = NGramModel::load_file(path)?;
        if let Some(t) = self.model.temperature {
            model = model.with_temperature(t)?;
        }
        Ok(model)
    }

    /// Load the poem format scorer when configured.
    pub fn build_format_scorer(&self) -> Result<Option<FormatScorer>, EngineError> {
        match &self.format_spec {
            None => Ok(None),
            Some(path) => {
                let spec = PoemFormatSpec::load_file(path)?;
                let tables = match &self.rhyme_tables {
                    Some(tables_path) => RhymeToneTables::load_file(tables_path)?,
                    None => RhymeToneTables::empty(),
                };
                Ok(Some(FormatScorer::new(spec, tables)?))
            }
        }
    }

    /// Validate everything that can be checked without network access.
    pub fn validate(&self) -> Result<(), EngineError> {
        self.scorer.validate()?;
        self.beam.validate()?;
        let template = self.resolve_template()?;
        template.validate()?;
        match self.model.backend {
            Backend::Ngram => {
                self.build_ngram_model()?;
            }
            Backend::Uniform => {
                self.build_model()?;
            }
            Backend::Remote => {
                self.model
                    .endpoint
                    .as_ref()
                    .ok_or_else(|| {
                        EngineError::Config("remote backend needs model.endpoint".into())
                    })?
                    .validate()?;
            }
        }
        let format = self.build_format_scorer()?;
        if self.scorer.mode == ScoreMode::InversePoem && format.is_none() {
            return Err(EngineError::Config(
                "inverse_poem mode requires format_spec".into(),
            ));
        }
        if self.scorer.mode != ScoreMode::InversePoem && format.is_some() {
            return Err(EngineError::Config(
                "format_spec is set but scorer.mode is not inverse_poem".into(),
            ));
        }
        Ok(())
    }
}
