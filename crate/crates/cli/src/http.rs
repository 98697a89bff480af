//! Chat-completions client for OpenAI-compatible endpoints.

use std::fmt;
use std::time::Duration;

use fgvl_core::extractor::{ClientError, LlmClient};
use serde_json::json;

pub struct HttpClient {
    endpoint: String,
    model: String,
    api_key: String,
    max_in_flight: usize,
    http: reqwest::blocking::Client,
}

// Hand-written so the key can never reach a log line.
impl fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpClient")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

impl HttpClient {
    /// Reads the key from `key_env`; a missing or empty variable is an error.
    pub fn from_env(endpoint: &str, model: &str, key_env: &str, max_in_flight: usize) -> anyhow::Result<Self> {
        let api_key = std::env::var(key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| anyhow::anyhow!("environment variable {key_env} is not set"))?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()?;
        Ok(Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            max_in_flight: max_in_flight.max(1),
            http,
        })
    }
}

impl LlmClient for HttpClient {
    fn identity(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        });
        let resp = self
            .http
            .post(format!("{}/chat/completions", self.endpoint))
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| ClientError::retriable(format!("request failed: {}", e.without_url())))?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(ClientError::retriable(format!("http {status}")));
        }
        if !status.is_success() {
            return Err(ClientError::fatal(format!("http {status}")));
        }
        let value: serde_json::Value = resp
            .json()
            .map_err(|e| ClientError::retriable(format!("unreadable response: {}", e.without_url())))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ClientError::fatal("response has no choices[0].message.content"))
    }

    fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn debug_output_hides_the_key() {
        std::env::set_var("FGVL_TEST_KEY_DEBUG", "sk-secret-value");
        let c = HttpClient::from_env("http://localhost:1", "m", "FGVL_TEST_KEY_DEBUG", 2).unwrap();
        let shown = format!("{c:?}");
        assert!(!shown.contains("sk-secret-value"));
        assert!(shown.contains("redacted"));
    }

    #[test]
    fn missing_key_is_an_error() {
        assert!(HttpClient::from_env("http://x", "m", "FGVL_TEST_KEY_SURELY_UNSET", 1).is_err());
    }

    #[test]
    fn connection_failure_is_retriable() {
        std::env::set_var("FGVL_TEST_KEY_CONN", "k");
        let c = HttpClient::from_env("http://127.0.0.1:9", "m", "FGVL_TEST_KEY_CONN", 1).unwrap();
        let err = c.complete("hello").unwrap_err();
        assert!(err.retriable);
    }
}
