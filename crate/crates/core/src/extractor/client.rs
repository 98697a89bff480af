use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientError {
    pub message: String,
    /// Transport-level failures are worth retrying; a missing fixture is not.
    pub retriable: bool,
}

impl ClientError {
    pub fn retriable(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            retriable: true,
        }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            retriable: false,
        }
    }
}

impl std::fmt::Display for ClientError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// Text-completion backend. Implementations must tolerate concurrent calls
/// from up to [`LlmClient::max_in_flight`] workers.
pub trait LlmClient: Send + Sync {
    /// Model name; part of the cache key.
    fn identity(&self) -> &str;

    fn complete(&self, prompt: &str) -> std::result::Result<String, ClientError>;

    fn max_in_flight(&self) -> usize {
        1
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Serialize, Deserialize)]
struct FixtureRecord {
    prompt_sha: String,
    response: String,
}

/// Replays recorded responses keyed by the SHA-256 of the prompt.
#[derive(Debug)]
pub struct FixtureClient {
    identity: String,
    responses: HashMap<String, String>,
    calls: AtomicUsize,
}

impl FixtureClient {
    pub fn new(identity: impl Into<String>) -> Self {
        Self {
            identity: identity.into(),
            responses: HashMap::new(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_response(mut self, prompt: &str, response: impl Into<String>) -> Self {
        self.responses.insert(sha256_hex(prompt), response.into());
        self
    }

    /// Load `{prompt_sha, response}` lines.
    pub fn load(identity: impl Into<String>, path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut client = Self::new(identity);
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: FixtureRecord =
                serde_json::from_str(&line).map_err(|e| Error::ManifestRecord {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            client.responses.insert(rec.prompt_sha, rec.response);
        }
        Ok(client)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl LlmClient for FixtureClient {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn complete(&self, prompt: &str) -> std::result::Result<String, ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let sha = sha256_hex(prompt);
        self.responses
            .get(&sha)
            .cloned()
            .ok_or_else(|| ClientError::fatal(format!("no recorded response for prompt {sha}")))
    }

    fn max_in_flight(&self) -> usize {
        4
    }
}
