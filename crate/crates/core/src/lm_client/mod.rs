//! HTTP client for a remote scoring/sampling service.
//!
//! The wire protocol is JSON over HTTP with token-level payloads (lists of
//! strings), keeping tokenizer authority on the client side:
//!
//! * `POST {base_url}/v1/logprob` with `{"prefix": [...], "continuation":
//!   [...]}` returns `{"logprob": number}`.
//! * `POST {base_url}/v1/sample` with `{"prefix": [...], "stop": [...],
//!   "max_tokens": n, "n": n, "seed": n}` returns `{"continuations":
//!   [[...], ...]}` with exactly `n` entries.
//!
//! Requests carry `Authorization: Bearer <token>` when an auth token is
//! configured. Only timeouts and connection failures are retried; any HTTP
//! response, success or not, is final. [`RemoteModel`] wraps the calls into
//! the [`LanguageModel`] contract.

pub mod stub;

use std::collections::BTreeSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::lm_core::{LanguageModel, TokenSeq};

/// Environment variable overriding the service base URL.
pub const LM_URL_ENV: &str = "INVERSE_DECODE_LM_URL";

/// Connection settings for a remote language-model service.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteEndpoint {
    pub base_url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub auth_token: Option<String>,
}

fn default_timeout_ms() -> u64 {
    10_000
}

fn default_max_retries() -> u32 {
    2
}

impl RemoteEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        RemoteEndpoint {
            base_url: base_url.into(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            auth_token: None,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.base_url.is_empty() {
            return Err(EngineError::config("remote base_url is empty"));
        }
        if self.timeout_ms == 0 {
            return Err(EngineError::config("timeout_ms must be > 0"));
        }
        Ok(())
    }

    /// Apply the `INVERSE_DECODE_LM_URL` override when set.
    pub fn with_env_override(mut self) -> Self {
        if let Ok(url) = std::env::var(LM_URL_ENV) {
            if !url.is_empty() {
                self.base_url = url;
            }
        }
        self
    }

    fn agent(&self) -> ureq::Agent {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(self.timeout_ms)))
            .http_status_as_error(false)
            .build();
        ureq::Agent::new_with_config(config)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LogprobRequest {
    pub prefix: Vec<String>,
    pub continuation: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LogprobResponse {
    pub logprob: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SampleRequest {
    pub prefix: Vec<String>,
    pub stop: Vec<String>,
    pub max_tokens: usize,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SampleResponse {
    pub continuations: Vec<Vec<String>>,
}

fn classify_transport(err: ureq::Error) -> EngineError {
    match err {
        ureq::Error::Timeout(reason) => EngineError::backend(format!("timeout: {reason}"), true),
        ureq::Error::Io(e) => EngineError::backend(format!("io: {e}"), true),
        ureq::Error::ConnectionFailed => EngineError::backend("connection failed", true),
        ureq::Error::HostNotFound => EngineError::backend("host not found", true),
        other => EngineError::backend(other.to_string(), false),
    }
}

/// POST a JSON body, retrying only on retryable transport failures, and
/// return the raw response body of a 2xx answer.
fn post_json(
    agent: &ureq::Agent,
    endpoint: &RemoteEndpoint,
    path: &str,
    body: &impl Serialize,
) -> Result<String, EngineError> {
    endpoint.validate()?;
    let url = format!("{}{}", endpoint.base_url.trim_end_matches('/'), path);
    let mut attempt: u32 = 0;
    loop {
        let mut request = agent.post(&url);
        if let Some(token) = &endpoint.auth_token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        match request.send_json(body) {
            Ok(mut response) => {
                let status = response.status();
                if !status.is_success() {
                    return Err(EngineError::backend(format!("HTTP {status} from {url}"), false));
                }
                return response
                    .body_mut()
                    .read_to_string()
                    .map_err(|e| EngineError::protocol(format!("unreadable response body: {e}")));
            }
            Err(err) => {
                let classified = classify_transport(err);
                let retryable = matches!(&classified, EngineError::Backend { retryable: true, .. });
                if retryable && attempt < endpoint.max_retries {
                    attempt += 1;
                    continue;
                }
                return Err(classified);
            }
        }
    }
}

/// Total log-probability of `continuation` given `prefix` as reported by the
/// service. An empty continuation is 0 without any network call.
pub fn remote_logprob(
    endpoint: &RemoteEndpoint,
    prefix: &TokenSeq,
    continuation: &TokenSeq,
) -> Result<f64, EngineError> {
    logprob_with_agent(&endpoint.agent(), endpoint, prefix, continuation)
}

fn logprob_with_agent(
    agent: &ureq::Agent,
    endpoint: &RemoteEndpoint,
    prefix: &TokenSeq,
    continuation: &TokenSeq,
) -> Result<f64, EngineError> {
    if continuation.is_empty() {
        return Ok(0.0);
    }
    let body = LogprobRequest {
        prefix: prefix.tokens().to_vec(),
        continuation: continuation.tokens().to_vec(),
    };
    let raw = post_json(agent, endpoint, "/v1/logprob", &body)?;
    let parsed: LogprobResponse = serde_json::from_str(&raw)
        .map_err(|e| EngineError::protocol(format!("invalid logprob response: {e}")))?;
    if !parsed.logprob.is_finite() {
        return Err(EngineError::protocol(format!(
            "non-finite logprob {}",
            parsed.logprob
        )));
    }
    Ok(parsed.logprob)
}

/// Request `n` sampled continuations. The service must honor the stop-token
/// and max-token contracts of local sampling; returning fewer or more than
/// `n` continuations is a protocol error.
pub fn remote_sample(
    endpoint: &RemoteEndpoint,
    prefix: &TokenSeq,
    stop_tokens: &BTreeSet<String>,
    max_tokens: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<TokenSeq>, EngineError> {
    sample_with_agent(&endpoint.agent(), endpoint, prefix, stop_tokens, max_tokens, n, seed)
}

fn sample_with_agent(
    agent: &ureq::Agent,
    endpoint: &RemoteEndpoint,
    prefix: &TokenSeq,
    stop_tokens: &BTreeSet<String>,
    max_tokens: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<TokenSeq>, EngineError> {
    if n < 1 {
        return Err(EngineError::config("n must be >= 1"));
    }
    if max_tokens < 1 {
        return Err(EngineError::config("max_tokens must be >= 1"));
    }
    let body = SampleRequest {
        prefix: prefix.tokens().to_vec(),
        stop: stop_tokens.iter().cloned().collect(),
        max_tokens,
        n,
        seed,
    };
    let raw = post_json(agent, endpoint, "/v1/sample", &body)?;
    let parsed: SampleResponse = serde_json::from_str(&raw)
        .map_err(|e| EngineError::protocol(format!("invalid sample response: {e}")))?;
    if parsed.continuations.len() != n {
        return Err(EngineError::protocol(format!(
            "requested {n} continuations, got {}",
            parsed.continuations.len()
        )));
    }
    parsed
        .continuations
        .into_iter()
        .map(|tokens| {
            TokenSeq::from_tokens(tokens)
                .map_err(|e| EngineError::protocol(format!("invalid continuation: {e}")))
        })
        .collect()
}

/// Remote backend satisfying the [`LanguageModel`] contract.
pub struct RemoteModel {
    endpoint: RemoteEndpoint,
    agent: ureq::Agent,
}

impl RemoteModel {
    pub fn new(endpoint: RemoteEndpoint) -> Result<Self, EngineError> {
        endpoint.validate()?;
        let agent = endpoint.agent();
        Ok(RemoteModel { endpoint, agent })
    }

    pub fn endpoint(&self) -> &RemoteEndpoint {
        &self.endpoint
    }
}

impl LanguageModel for RemoteModel {
    fn identity(&self) -> String {
        format!("remote({})", self.endpoint.base_url)
    }

    fn logprob_from(
        &self,
        acc: f64,
        prefix: &TokenSeq,
        continuation: &TokenSeq,
    ) -> Result<f64, EngineError> {
        Ok(acc + logprob_with_agent(&self.agent, &self.endpoint, prefix, continuation)?)
    }

    fn sample_continuation(
        &self,
        prefix: &TokenSeq,
        stop_tokens: &BTreeSet<String>,
        max_tokens: usize,
        seed: u64,
    ) -> Result<TokenSeq, EngineError> {
        let mut samples =
            sample_with_agent(&self.agent, &self.endpoint, prefix, stop_tokens, max_tokens, 1, seed)?;
        Ok(samples.remove(0))
    }

    fn sample_n(
        &self,
        prefix: &TokenSeq,
        stop_tokens: &BTreeSet<String>,
        max_tokens: usize,
        n: usize,
        seed: u64,
    ) -> Result<Vec<TokenSeq>, EngineError> {
        sample_with_agent(&self.agent, &self.endpoint, prefix, stop_tokens, max_tokens, n, seed)
    }
}
