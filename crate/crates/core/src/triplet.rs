//! Disease triplets: `(severity?, location?, category)` extracted from one
//! report mention.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Field separator of the pipe grammar.
pub const FIELD_DELIMITER: char = '|';

/// Plural suffixes folded onto the last word of a category. All patterns end
/// in `s` and no replacement does, so the fold is idempotent.
const SUFFIX_TABLE: &[(&str, &str)] = &[
    ("sses", "ss"),
    ("ies", "y"),
    ("ions", "ion"),
    ("ules", "ule"),
    ("ates", "ate"),
    ("ures", "ure"),
    ("omas", "oma"),
    ("ents", "ent"),
    ("sts", "st"),
    ("ings", "ing"),
];

/// Lowercase, trim and collapse internal whitespace.
pub fn normalize_text(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// [`normalize_text`] plus singularization of the final word.
pub fn normalize_category(raw: &str) -> String {
    let text = normalize_text(raw);
    let (head, last) = match text.rfind(' ') {
        Some(pos) => (&text[..=pos], &text[pos + 1..]),
        None => ("", text.as_str()),
    };
    for (suffix, replacement) in SUFFIX_TABLE {
        if last.len() >= suffix.len() + 2 && last.ends_with(suffix) {
            let stem = &last[..last.len() - suffix.len()];
            return format!("{head}{stem}{replacement}");
        }
    }
    text
}

/// One extracted finding. Category is mandatory; severity and location are
/// either absent or non-empty normalized tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DiseaseTriplet {
    severity: Option<String>,
    location: Option<String>,
    category: String,
}

fn check_field(field: &str, value: &str) -> Result<()> {
    if value.contains(FIELD_DELIMITER) || value.contains('\n') {
        return Err(Error::InvalidTriplet(format!(
            "{field} `{value}` contains a delimiter or newline"
        )));
    }
    Ok(())
}

impl DiseaseTriplet {
    pub fn new(severity: Option<&str>, location: Option<&str>, category: &str) -> Result<Self> {
        let optional = |name: &str, v: Option<&str>| -> Result<Option<String>> {
            match v {
                None => Ok(None),
                Some(raw) => {
                    check_field(name, raw)?;
                    let norm = normalize_text(raw);
                    Ok((!norm.is_empty()).then_some(norm))
                }
            }
        };
        check_field("category", category)?;
        let category = normalize_category(category);
        if category.is_empty() {
            return Err(Error::InvalidTriplet("category is empty".into()));
        }
        Ok(Self {
            severity: optional("severity", severity)?,
            location: optional("location", location)?,
            category,
        })
    }

    pub fn category_only(category: &str) -> Result<Self> {
        Self::new(None, None, category)
    }

    pub fn severity(&self) -> Option<&str> {
        self.severity.as_deref()
    }

    pub fn location(&self) -> Option<&str> {
        self.location.as_deref()
    }

    pub fn category(&self) -> &str {
        &self.category
    }

    /// Copy with severity and location dropped.
    pub fn entity(&self) -> Self {
        Self {
            severity: None,
            location: None,
            category: self.category.clone(),
        }
    }

    /// Render in the pipe grammar: `severity|location|category`.
    pub fn to_pipe(&self) -> String {
        format!(
            "{}{d}{}{d}{}",
            self.severity.as_deref().unwrap_or(""),
            self.location.as_deref().unwrap_or(""),
            self.category,
            d = FIELD_DELIMITER
        )
    }

    /// Parse a single pipe-grammar record. Exactly three fields are required.
    pub fn from_pipe(record: &str) -> Result<Self> {
        let fields: Vec<&str> = record.split(FIELD_DELIMITER).collect();
        if fields.len() != 3 {
            return Err(Error::InvalidTriplet(format!(
                "expected 3 `|`-separated fields, got {} in `{record}`",
                fields.len()
            )));
        }
        fn opt(s: &str) -> Option<&str> {
            let t = s.trim();
            (!t.is_empty()).then_some(t)
        }
        Self::new(opt(fields[0]), opt(fields[1]), fields[2])
    }
}

impl fmt::Display for DiseaseTriplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_pipe())
    }
}

impl TryFrom<String> for DiseaseTriplet {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Self::from_pipe(&value)
    }
}

impl From<DiseaseTriplet> for String {
    fn from(t: DiseaseTriplet) -> String {
        t.to_pipe()
    }
}

/// Order-preserving dedup.
pub fn dedup_triplets(triplets: Vec<DiseaseTriplet>) -> Vec<DiseaseTriplet> {
    let mut seen = std::collections::HashSet::new();
    triplets
        .into_iter()
        .filter(|t| seen.insert(t.clone()))
        .collect()
}
