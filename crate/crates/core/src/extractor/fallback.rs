//! Deterministic lexicon-driven extractor. Works offline and serves as an
//! independent check on the model-backed path.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::triplet::{dedup_triplets, normalize_category, normalize_text, DiseaseTriplet};

const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.toml");

const NEGATION_CUES: &[&str] = &["no", "without", "free of", "negative for", "not"];
const SCOPE_BREAKERS: &[&str] = &["but", "however", "although", "though", "while"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub severities: Vec<String>,
    pub locations: Vec<String>,
    pub categories: Vec<String>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::from_toml(DEFAULT_LEXICON).expect("shipped lexicon parses")
    }
}

impl Lexicon {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Serde(format!("lexicon: {e}")))
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Category,
    Location,
    Severity,
    Negation,
    Breaker,
}

struct Matcher {
    categories: HashSet<String>,
    locations: HashSet<String>,
    severities: HashSet<String>,
    negations: HashSet<String>,
    breakers: HashSet<String>,
    max_words: usize,
}

impl Matcher {
    fn new(lexicon: &Lexicon) -> Self {
        let set = |items: &[String], f: fn(&str) -> String| -> HashSet<String> {
            items.iter().map(|s| f(s)).filter(|s| !s.is_empty()).collect()
        };
        let owned = |items: &[&str]| items.iter().map(|s| s.to_string()).collect::<HashSet<_>>();
        let categories = set(&lexicon.categories, normalize_category);
        let locations = set(&lexicon.locations, normalize_text);
        let severities = set(&lexicon.severities, normalize_text);
        let max_words = categories
            .iter()
            .chain(&locations)
            .chain(&severities)
            .map(|p| p.split(' ').count())
            .max()
            .unwrap_or(1)
            .max(2);
        Self {
            categories,
            locations,
            severities,
            negations: owned(NEGATION_CUES),
            breakers: owned(SCOPE_BREAKERS),
            max_words,
        }
    }

    /// Longest phrase starting at `i`; on equal length category beats
    /// location beats severity.
    fn longest(&self, tokens: &[String], i: usize) -> Option<(usize, Kind, String)> {
        let upper = self.max_words.min(tokens.len() - i);
        for len in (1..=upper).rev() {
            let phrase = tokens[i..i + len].join(" ");
            let folded = normalize_category(&phrase);
            if self.categories.contains(&folded) {
                return Some((len, Kind::Category, folded));
            }
            for (set, kind) in [
                (&self.locations, Kind::Location),
                (&self.severities, Kind::Severity),
                (&self.negations, Kind::Negation),
                (&self.breakers, Kind::Breaker),
            ] {
                if set.contains(&phrase) {
                    return Some((len, kind, phrase));
                }
            }
        }
        None
    }
}

fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    for (k, &(pos, c)) in chars.iter().enumerate() {
        let next_is_break = chars.get(k + 1).is_none_or(|&(_, n)| n.is_whitespace());
        let ends = match c {
            '\n' | ';' => true,
            '.' | '!' | '?' => next_is_break,
            _ => false,
        };
        if ends {
            out.push(&text[start..pos]);
            start = pos + c.len_utf8();
        }
    }
    out.push(&text[start..]);
    out.into_iter().filter(|s| !s.trim().is_empty()).collect()
}

fn tokenize(sentence: &str) -> Vec<String> {
    sentence
        .split(|c: char| c.is_whitespace() || matches!(c, ',' | ':' | '(' | ')' | '"'))
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric() && c != '-' && c != '/'))
        .map(|t| t.trim_matches('-'))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Sentence-split, then within each sentence take the longest category match
/// with the nearest preceding severity and location. A negation cue silences
/// every category after it until the sentence ends or a contrastive word
/// ("but", "however", ...) closes the scope.
pub fn fallback_extract(report_text: &str, lexicon: &Lexicon) -> Vec<DiseaseTriplet> {
    if lexicon.is_empty() {
        return Vec::new();
    }
    let matcher = Matcher::new(lexicon);
    let mut found = Vec::new();
    for sentence in split_sentences(report_text) {
        let tokens = tokenize(sentence);
        let mut negated = false;
        let mut severity: Option<String> = None;
        let mut location: Option<String> = None;
        let mut i = 0;
        while i < tokens.len() {
            let Some((len, kind, phrase)) = matcher.longest(&tokens, i) else {
                i += 1;
                continue;
            };
            match kind {
                Kind::Negation => negated = true,
                Kind::Breaker => {
                    negated = false;
                    severity = None;
                    location = None;
                }
                Kind::Severity => severity = Some(phrase),
                Kind::Location => location = Some(phrase),
                Kind::Category => {
                    if !negated {
                        if let Ok(t) =
                            DiseaseTriplet::new(severity.as_deref(), location.as_deref(), &phrase)
                        {
                            found.push(t);
                        }
                    }
                    severity = None;
                    location = None;
                }
            }
            i += len;
        }
    }
    dedup_triplets(found)
}
