//! Minimal chat-completions client.

use std::time::Duration;

use serde_json::json;

use super::{OracleBackend, OracleError, OracleReply, OracleRequest};

pub const ENDPOINT_VAR: &str = "CLAIMQ_ENDPOINT";
pub const API_KEY_VAR: &str = "CLAIMQ_API_KEY";

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub max_attempts: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            max_attempts: 3,
            backoff: Duration::from_millis(250),
            timeout: Duration::from_secs(120),
        }
    }

    /// Reads the endpoint and key from the named environment variables.
    pub fn from_env(endpoint_var: &str, key_var: &str) -> Result<Self, OracleError> {
        let endpoint = std::env::var(endpoint_var)
            .map_err(|_| OracleError::Backend(format!("{endpoint_var} is not set")))?;
        let mut cfg = Self::new(endpoint);
        cfg.api_key = std::env::var(key_var).ok();
        Ok(cfg)
    }
}

pub struct RemoteBackend {
    cfg: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(cfg: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .build()
            .into();
        Self { cfg, agent }
    }

    fn attempt(&self, request: &OracleRequest) -> Result<OracleReply, String> {
        let body = json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": [{"role": "user", "content": request.rendered_prompt}],
        });
        let mut req = self.agent.post(&self.cfg.endpoint);
        if let Some(key) = &self.cfg.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .header("Content-Type", "application/json")
            .send(body.to_string())
            .map_err(|e| e.to_string())?;
        let value: serde_json::Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        let text = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| format!("response has no message content: {value}"))?
            .to_string();
        let usage = &value["usage"];
        Ok(OracleReply {
            input_tokens: usage["prompt_tokens"]
                .as_u64()
                .unwrap_or_else(|| super::synthetic_tokens(&request.rendered_prompt)),
            output_tokens: usage["completion_tokens"]
                .as_u64()
                .unwrap_or_else(|| super::synthetic_tokens(&text)),
            text,
        })
    }
}

impl OracleBackend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(&self, request: &OracleRequest) -> Result<OracleReply, OracleError> {
        let attempts = self.cfg.max_attempts.max(1);
        let mut last = String::new();
        for i in 0..attempts {
            match self.attempt(request) {
                Ok(reply) => return Ok(reply),
                Err(e) => {
                    tracing::warn!(attempt = i + 1, error = %e, "oracle request failed");
                    last = e;
                    if i + 1 < attempts {
                        std::thread::sleep(self.cfg.backoff * 2u32.pow(i));
                    }
                }
            }
        }
        Err(OracleError::Transport {
            attempts,
            message: last,
        })
    }
}
