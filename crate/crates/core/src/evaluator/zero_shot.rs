//! Category library scoring and the zero-shot classification report.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::metrics::{macro_metrics, top_k_hit_rate, EvalReport};
use crate::corpus::ImageTensor;
use crate::error::{Error, Result};
use crate::knowledge::{render_structured_label, KnowledgeDictionary, LookupPolicy, RenderMode};
use crate::model::DualEncoder;
use crate::triplet::{normalize_category, DiseaseTriplet};

/// Bare-name prompt used as the comparison style.
pub const PROMPT_TEMPLATE: &str = "This is an X-ray image of {category}";

pub fn prompt_text(category: &str) -> String {
    PROMPT_TEMPLATE.replace("{category}", category)
}

/// How library entries are turned into text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LibraryStyle {
    Entity,
    FgEntity,
    #[default]
    FgEntityPlusExplanation,
    PromptTemplate,
}

impl From<RenderMode> for LibraryStyle {
    fn from(mode: RenderMode) -> Self {
        match mode {
            RenderMode::Entity => LibraryStyle::Entity,
            RenderMode::FgEntity => LibraryStyle::FgEntity,
            RenderMode::FgEntityPlusExplanation => LibraryStyle::FgEntityPlusExplanation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryEntry {
    pub category: String,
    #[serde(default)]
    pub severity: Option<String>,
    #[serde(default)]
    pub location: Option<String>,
}

impl LibraryEntry {
    pub fn category(name: &str) -> Self {
        Self {
            category: normalize_category(name),
            severity: None,
            location: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryLibrary {
    entries: Vec<LibraryEntry>,
    pub style: LibraryStyle,
}

impl CategoryLibrary {
    /// Non-empty, and no two entries alike.
    pub fn new(entries: Vec<LibraryEntry>, style: LibraryStyle) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("category library is empty".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if entries[..i].contains(e) {
                return Err(Error::Config(format!("category library repeats `{}`", e.category)));
            }
        }
        Ok(Self { entries, style })
    }

    pub fn from_categories<S: AsRef<str>>(names: &[S], style: LibraryStyle) -> Result<Self> {
        Self::new(names.iter().map(|n| LibraryEntry::category(n.as_ref())).collect(), style)
    }

    pub fn entries(&self) -> &[LibraryEntry] {
        &self.entries
    }

    pub fn categories(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.category.clone()).collect()
    }

    pub fn texts(&self, dict: &KnowledgeDictionary, policy: LookupPolicy) -> Result<Vec<String>> {
        self.entries
            .iter()
            .map(|e| {
                let t = DiseaseTriplet::new(e.severity.as_deref(), e.location.as_deref(), &e.category)?;
                let mode = match self.style {
                    LibraryStyle::PromptTemplate => return Ok(prompt_text(t.category())),
                    LibraryStyle::Entity => RenderMode::Entity,
                    LibraryStyle::FgEntity => RenderMode::FgEntity,
                    LibraryStyle::FgEntityPlusExplanation => RenderMode::FgEntityPlusExplanation,
                };
                Ok(render_structured_label(&t, dict, mode, policy)?.text)
            })
            .collect()
    }
}

/// Cosine of every image against every text, `N × T`.
pub fn score_texts<S: AsRef<str> + Sync>(model: &DualEncoder, images: &[ImageTensor], texts: &[S]) -> Result<Array2<f64>> {
    let i = model.encode_images(images)?;
    score_embedded(model, &i, texts)
}

/// As [`score_texts`] with image embeddings computed once by the caller.
pub fn score_embedded<S: AsRef<str> + Sync>(model: &DualEncoder, image_embeddings: &Array2<f64>, texts: &[S]) -> Result<Array2<f64>> {
    let l = model.encode_texts(texts)?;
    let mut s = image_embeddings.dot(&l.t());
    s.mapv_inplace(|v| v.clamp(-1.0, 1.0));
    Ok(s)
}

pub fn zero_shot_scores(
    model: &DualEncoder,
    images: &[ImageTensor],
    library: &CategoryLibrary,
    dict: &KnowledgeDictionary,
    policy: LookupPolicy,
) -> Result<Array2<f64>> {
    score_texts(model, images, &library.texts(dict, policy)?)
}

/// Multi-hot gold matrix over `classes` from per-sample category lists.
pub fn gold_matrix(sample_categories: &[Vec<String>], classes: &[String]) -> Array2<bool> {
    let mut g = Array2::from_elem((sample_categories.len(), classes.len()), false);
    for (mut row, cats) in g.axis_iter_mut(Axis(0)).zip(sample_categories) {
        for (c, class) in classes.iter().enumerate() {
            row[c] = cats.iter().any(|x| normalize_category(x) == *class);
        }
    }
    g
}

/// Zero-shot report: per-class best-F1 metrics plus the top-2 hit rate.
pub fn zero_shot_report(
    model: &DualEncoder,
    images: &[ImageTensor],
    sample_categories: &[Vec<String>],
    library: &CategoryLibrary,
    dict: &KnowledgeDictionary,
    policy: LookupPolicy,
) -> Result<EvalReport> {
    if images.len() != sample_categories.len() {
        return Err(Error::Shape(format!("{} images, {} category lists", images.len(), sample_categories.len())));
    }
    let scores = zero_shot_scores(model, images, library, dict, policy)?;
    let classes = library.categories();
    let gold = gold_matrix(sample_categories, &classes);
    let mut report = macro_metrics(&scores, &gold, &classes)?;
    report.extras.insert("top1_hit_rate".into(), top_k_hit_rate(&scores, &gold, 1));
    report.extras.insert("top2_hit_rate".into(), top_k_hit_rate(&scores, &gold, 2));
    Ok(report)
}
