use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::extractor::Lexicon;
use crate::knowledge::KnowledgeDictionary;

/// Text → fixed-dimension vector. Implementations must be deterministic per
/// text and never return an all-zero vector.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Vec<f64>, String>;

    /// Whether `embed` may be called from several threads at once.
    fn concurrent(&self) -> bool {
        true
    }
}

fn digest(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "is", "are", "and", "or", "with", "where", "in", "on", "at", "to", "as",
    "by", "for", "there", "this", "that", "seen", "often", "within",
];

/// Hashed bag of words: lowercase word tokens, stopwords dropped, each token
/// hashed to a signed bucket and weighted by occurrence count times its word
/// weight.
#[derive(Debug, Clone)]
pub struct HashedBagOfWords {
    dim: usize,
    default_weight: f64,
    weights: BTreeMap<String, f64>,
}

impl Default for HashedBagOfWords {
    fn default() -> Self {
        Self::new(4096)
    }
}

impl HashedBagOfWords {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            default_weight: 1.0,
            weights: BTreeMap::new(),
        }
    }

    /// Weight of every word without an explicit weight.
    pub fn with_default_weight(mut self, weight: f64) -> Self {
        self.default_weight = weight;
        self
    }

    /// Give each of `words` (multi-word phrases are split) the weight `weight`.
    /// Later calls override earlier ones for the same word.
    pub fn with_weight(mut self, words: impl IntoIterator<Item = String>, weight: f64) -> Self {
        for phrase in words {
            for w in Self::tokens(&phrase) {
                self.weights.insert(w, weight);
            }
        }
        self
    }

    /// Down-weight the given qualifier words (e.g. severities and locations)
    /// so that similarity is driven by what the finding is.
    pub fn with_qualifiers(self, words: impl IntoIterator<Item = String>, weight: f64) -> Self {
        self.with_weight(words, weight)
    }

    pub fn word_weight(&self, token: &str) -> f64 {
        self.weights.get(token).copied().unwrap_or(self.default_weight)
    }

    pub fn tokens(text: &str) -> Vec<String> {
        text.split(|c: char| !(c.is_alphanumeric() || c == '-'))
            .map(|t| t.trim_matches('-').to_lowercase())
            .filter(|t| !t.is_empty() && !STOPWORDS.contains(&t.as_str()))
            .collect()
    }

    fn bucket(&self, token: &str) -> (usize, f64) {
        let h = digest(token.as_bytes());
        let idx = u64::from_le_bytes(h[..8].try_into().unwrap()) % self.dim as u64;
        let sign = if h[8] & 1 == 0 { 1.0 } else { -1.0 };
        (idx as usize, sign)
    }
}

impl EmbeddingProvider for HashedBagOfWords {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, String> {
        let mut v = vec![0.0; self.dim];
        let mut tokens = Self::tokens(text);
        if tokens.is_empty() {
            // text made only of stopwords or punctuation: hash it whole
            tokens.push(text.trim().to_lowercase());
        }
        for tok in &tokens {
            let w = self.word_weight(tok);
            let (i, s) = self.bucket(tok);
            v[i] += s * w;
        }
        if v.iter().all(|x| *x == 0.0) {
            // opposite-signed collisions cancelled out
            let (i, _) = self.bucket(text);
            v[i] = 1.0;
        }
        Ok(v)
    }
}

/// Unit vectors drawn from a generator seeded by the text hash. Distinct
/// texts are nearly orthogonal in high dimension.
#[derive(Debug, Clone)]
pub struct HashUnitProvider {
    dim: usize,
}

impl HashUnitProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }
}

impl EmbeddingProvider for HashUnitProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, String> {
        let mut rng = ChaCha8Rng::from_seed(digest(text.as_bytes()));
        let mut v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            v[0] = 1.0;
        } else {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// Fixed text → vector table for hand-built cases; unknown texts fail.
#[derive(Debug, Clone, Default)]
pub struct TableProvider {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl TableProvider {
    pub fn new(entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Self {
        let table: HashMap<_, _> = entries.into_iter().collect();
        let dim = table.values().next().map_or(0, Vec::len);
        assert!(table.values().all(|v| v.len() == dim), "table vectors differ in length");
        Self { dim, table }
    }
}

impl EmbeddingProvider for TableProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, String> {
        self.table.get(text).cloned().ok_or_else(|| "text not in table".to_string())
    }
}

/// Which provider backs the similarity targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    HashedBagOfWords,
    HashUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityConfig {
    pub provider: ProviderKind,
    pub dim: usize,
    /// Bag-of-words weight of category-name words.
    pub category_weight: f64,
    /// Bag-of-words weight of severity and location words.
    pub qualifier_weight: f64,
    /// Bag-of-words weight of every other word, explanations included.
    pub other_weight: f64,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            provider: ProviderKind::HashedBagOfWords,
            dim: 4096,
            category_weight: 1.0,
            qualifier_weight: 0.05,
            other_weight: 0.05,
        }
    }
}

impl SimilarityConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.dim == 0 {
            v.push("SimilarityConfig.dim must be positive".into());
        }
        for (name, w) in [
            ("category_weight", self.category_weight),
            ("qualifier_weight", self.qualifier_weight),
            ("other_weight", self.other_weight),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                v.push(format!("SimilarityConfig.{name} must be finite and >= 0, got {w}"));
            }
        }
        if self.category_weight == 0.0 {
            v.push("SimilarityConfig.category_weight must be > 0".into());
        }
        v
    }

    /// Category words come from the dictionary keys and the lexicon; they
    /// take precedence over qualifier words when a word is both.
    pub fn build(&self, dict: &KnowledgeDictionary, lexicon: &Lexicon) -> Box<dyn EmbeddingProvider> {
        match self.provider {
            ProviderKind::HashUnit => Box::new(HashUnitProvider::new(self.dim)),
            ProviderKind::HashedBagOfWords => {
                let qualifiers = lexicon.severities.iter().chain(&lexicon.locations).cloned();
                let categories = dict
                    .categories()
                    .map(str::to_string)
                    .chain(lexicon.categories.iter().cloned())
                    .collect::<Vec<_>>();
                Box::new(
                    HashedBagOfWords::new(self.dim)
                        .with_default_weight(self.other_weight)
                        .with_weight(qualifiers, self.qualifier_weight)
                        .with_weight(categories, self.category_weight),
                )
            }
        }
    }
}
