//! Blocking HTTP client for chat-completion endpoints.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{Completion, EndpointConfig, Gateway, GatewayError, GatewayStats, InFlightGauge};

/// Client for any endpoint speaking the open chat-completions JSON shape.
/// One conversation maps to one request with a single user message.
pub struct HttpGateway {
    config: EndpointConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    gauge: InFlightGauge,
    audit: Option<Mutex<std::fs::File>>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
    #[serde(default)]
    logprobs: Option<ChoiceLogprobs>,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

#[derive(Deserialize)]
struct ChoiceLogprobs {
    #[serde(default)]
    content: Vec<TokenLogprob>,
}

#[derive(Deserialize)]
struct TokenLogprob {
    logprob: f64,
}

impl HttpGateway {
    pub fn new(config: EndpointConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let api_key = std::env::var(&config.api_key_env).ok();
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
        let audit = match &config.audit_log {
            Some(path) => {
                let file = std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| GatewayError::InvalidConfig(format!("audit log: {e}")))?;
                Some(Mutex::new(file))
            }
            None => None,
        };
        Ok(HttpGateway {
            gauge: InFlightGauge::new(config.max_in_flight),
            config,
            api_key,
            client,
            audit,
        })
    }

    fn endpoint_url(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }

    fn send_once(
        &self,
        body: &serde_json::Value,
    ) -> Result<(String, Option<Vec<f64>>), GatewayError> {
        let mut req = self.client.post(self.endpoint_url()).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| GatewayError::RequestFailed {
            attempts: 1,
            message: e.to_string(),
        })?;
        let status = resp.status();
        let raw = resp.text().unwrap_or_default();
        if !status.is_success() {
            return Err(GatewayError::RequestFailed {
                attempts: 1,
                message: format!("status {status}: {raw}"),
            });
        }
        let parsed: ChatResponse =
            serde_json::from_str(&raw).map_err(|e| GatewayError::MalformedResponse {
                message: e.to_string(),
                body: raw.clone(),
            })?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or(GatewayError::MalformedResponse {
                message: "empty choices".into(),
                body: raw.clone(),
            })?;
        let logprobs = choice
            .logprobs
            .map(|lp| lp.content.into_iter().map(|t| t.logprob).collect());
        Ok((choice.message.content, logprobs))
    }

    fn audit_line(&self, prompt: &str, outcome: &str) {
        if let Some(file) = &self.audit {
            let line = json!({
                "model": self.config.model_name,
                "prompt": prompt,
                "outcome": outcome,
            });
            let mut file = file.lock().unwrap();
            let _ = writeln!(file, "{line}");
        }
    }
}

impl Gateway for HttpGateway {
    fn complete(&self, prompt: &str, max_output_tokens: usize) -> Result<Completion, GatewayError> {
        let _permit = self.gauge.enter();
        let mut body = json!({
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.sampling.temperature,
            "top_p": self.config.sampling.top_p,
            "max_tokens": max_output_tokens.min(self.config.sampling.max_output_tokens),
        });
        if self.config.request_logprobs {
            body["logprobs"] = json!(true);
        }

        let start = Instant::now();
        let mut last_err = None;
        for attempt in 0..self.config.retry.max_attempts {
            if attempt > 0 {
                let backoff = self.config.retry.backoff_base_ms << (attempt - 1);
                std::thread::sleep(Duration::from_millis(backoff));
            }
            match self.send_once(&body) {
                Ok((text, logprobs)) => {
                    self.audit_line(prompt, &text);
                    return Ok(Completion {
                        text,
                        token_ids: None,
                        logprobs,
                        latency_ms: start.elapsed().as_secs_f64() * 1e3,
                    });
                }
                Err(e @ GatewayError::MalformedResponse { .. }) => {
                    // Not transient; surface immediately with the raw body.
                    self.audit_line(prompt, &format!("error: {e}"));
                    return Err(e);
                }
                Err(e) => last_err = Some(e),
            }
        }
        let message = match last_err {
            Some(GatewayError::RequestFailed { message, .. }) => message,
            Some(other) => other.to_string(),
            None => "no attempts made".to_string(),
        };
        self.audit_line(prompt, &format!("failed: {message}"));
        Err(GatewayError::RequestFailed {
            attempts: self.config.retry.max_attempts,
            message,
        })
    }

    fn stats(&self) -> GatewayStats {
        self.gauge.stats()
    }
}
