//! Report → disease triplets through a pluggable completion client, with a
//! response cache and an offline lexicon fallback.

mod cache;
mod client;
mod fallback;
mod parse;
mod prompt;

use std::thread;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::triplet::DiseaseTriplet;
pub use cache::{CacheRecord, ExtractionCache};
pub use client::{sha256_hex, ClientError, FixtureClient, LlmClient};
pub use fallback::{fallback_extract, Lexicon};
pub use parse::{parse_llm_response, render_response, ParseOutcome};
pub use prompt::{build_prompt, OutputGrammar, PromptConfig, DEFAULT_TEMPLATE, REPORT_SLOT};

use crate::corpus::{Corpus, Study};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: usize,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionSource {
    Gold,
    Cache,
    Client,
    /// Rule-based extraction, no model involved.
    Fallback,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub id: String,
    pub triplets: Vec<DiseaseTriplet>,
    pub source: ExtractionSource,
    #[serde(default)]
    pub skipped_lines: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn complete_with_retries(
    study_id: &str,
    prompt: &str,
    client: &dyn LlmClient,
    retry: &RetryPolicy,
) -> Result<String> {
    let attempts = retry.max_attempts.max(1);
    let mut last = String::new();
    for attempt in 1..=attempts {
        match client.complete(prompt) {
            Ok(text) => return Ok(text),
            Err(e) => {
                log::warn!("study {study_id}: attempt {attempt}/{attempts} failed: {e}");
                last = e.message.clone();
                if !e.retriable {
                    return Err(Error::Client {
                        study: study_id.to_string(),
                        attempts: attempt,
                        message: last,
                    });
                }
                if attempt < attempts {
                    thread::sleep(retry.base_delay * (1u32 << (attempt - 1)));
                }
            }
        }
    }
    Err(Error::Client {
        study: study_id.to_string(),
        attempts,
        message: last,
    })
}

/// Triplets for one study. Gold triplets short-circuit; otherwise the cache is
/// consulted before the client.
pub fn extract_triplets(
    study: &Study,
    client: &dyn LlmClient,
    cache: &ExtractionCache,
    config: &PromptConfig,
    retry: &RetryPolicy,
) -> Result<ExtractionRecord> {
    if let Some(gold) = &study.gold_triplets {
        return Ok(ExtractionRecord {
            id: study.id.clone(),
            triplets: gold.clone(),
            source: ExtractionSource::Gold,
            skipped_lines: 0,
            error: None,
        });
    }
    let prompt = build_prompt(&study.report_text, config)?;
    let (response, source) = match cache.get(client.identity(), &prompt) {
        Some(hit) => (hit, ExtractionSource::Cache),
        None => {
            let text = complete_with_retries(&study.id, &prompt, client, retry)?;
            cache.insert(client.identity(), &prompt, &text)?;
            (text, ExtractionSource::Client)
        }
    };
    let parsed = parse_llm_response(&response, config);
    Ok(ExtractionRecord {
        id: study.id.clone(),
        triplets: parsed.triplets,
        source,
        skipped_lines: parsed.skipped_lines,
        error: None,
    })
}

/// Rule-based counterpart of [`extract_corpus`]; gold triplets still
/// short-circuit.
pub fn fallback_corpus(corpus: &Corpus, lexicon: &Lexicon) -> Vec<ExtractionRecord> {
    corpus
        .iter()
        .map(|study| match &study.gold_triplets {
            Some(gold) => ExtractionRecord {
                id: study.id.clone(),
                triplets: gold.clone(),
                source: ExtractionSource::Gold,
                skipped_lines: 0,
                error: None,
            },
            None => ExtractionRecord {
                id: study.id.clone(),
                triplets: fallback_extract(&study.report_text, lexicon),
                source: ExtractionSource::Fallback,
                skipped_lines: 0,
                error: None,
            },
        })
        .collect()
}

/// Extract a whole corpus on at most `client.max_in_flight()` workers.
/// Failures are recorded per study and never abort the run; output order
/// follows the corpus.
pub fn extract_corpus(
    corpus: &Corpus,
    client: &dyn LlmClient,
    cache: &ExtractionCache,
    config: &PromptConfig,
    retry: &RetryPolicy,
) -> Result<Vec<ExtractionRecord>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(client.max_in_flight().max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let records = pool.install(|| {
        corpus
            .studies
            .par_iter()
            .map(|study| {
                extract_triplets(study, client, cache, config, retry).unwrap_or_else(|e| {
                    log::error!("study {} failed: {e}", study.id);
                    ExtractionRecord {
                        id: study.id.clone(),
                        triplets: Vec::new(),
                        source: ExtractionSource::Failed,
                        skipped_lines: 0,
                        error: Some(e.to_string()),
                    }
                })
            })
            .collect()
    });
    Ok(records)
}
