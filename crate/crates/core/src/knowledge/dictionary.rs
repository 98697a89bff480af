use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::triplet::normalize_category;

const SHIPPED: &str = include_str!("../../data/dictionary.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LookupPolicy {
    #[default]
    Strict,
    Fallback,
}

/// Immutable map from normalized category to explanation text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeDictionary {
    version: String,
    entries: BTreeMap<String, String>,
}

impl KnowledgeDictionary {
    pub fn new(version: impl Into<String>, raw: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (key, explanation) in raw {
            let norm = normalize_category(&key);
            if norm.is_empty() {
                return Err(Error::Dictionary("empty category key".into()));
            }
            let explanation = explanation.trim().to_string();
            if explanation.is_empty() {
                return Err(Error::Dictionary(format!("empty explanation for `{norm}`")));
            }
            if entries.insert(norm.clone(), explanation).is_some() {
                return Err(Error::Dictionary(format!("duplicate key `{norm}` after normalization")));
            }
        }
        Ok(Self {
            version: version.into(),
            entries,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            version: String,
            entries: BTreeMap<String, String>,
        }
        let doc: Doc = toml::from_str(text).map_err(|e| Error::Dictionary(e.to_string()))?;
        Self::new(doc.version, doc.entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// The dictionary bundled with the crate.
    pub fn shipped() -> Self {
        Self::from_toml(SHIPPED).expect("shipped dictionary parses")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("dictionary serializes")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn get(&self, category: &str) -> Option<&str> {
        self.entries.get(category).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Exact-key lookup. Under [`LookupPolicy::Fallback`] a miss returns the
/// category token itself.
pub fn lookup_explanation(
    category: &str,
    dict: &KnowledgeDictionary,
    policy: LookupPolicy,
) -> Result<String> {
    match (dict.get(category), policy) {
        (Some(e), _) => Ok(e.to_string()),
        (None, LookupPolicy::Fallback) => Ok(category.to_string()),
        (None, LookupPolicy::Strict) => Err(Error::UnknownCategory(category.to_string())),
    }
}
