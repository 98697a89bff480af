//! Image-to-report retrieval with Precision@K.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::metrics::precision_at_k;
use super::zero_shot::{prompt_text, score_embedded};
use crate::corpus::{ImageTensor, NORMAL_REPORT};
use crate::error::{Error, Result};
use crate::knowledge::{render_structured_label, KnowledgeDictionary, LookupPolicy, RenderMode};
use crate::model::DualEncoder;
use crate::triplet::{normalize_category, DiseaseTriplet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalStyle {
    /// Structured labels with explanations.
    Explanation,
    /// `This is an X-ray image of {category}` per category.
    PromptTemplate,
}

/// Document text standing for one study.
pub fn study_document(
    triplets: &[DiseaseTriplet],
    categories: &[String],
    style: RetrievalStyle,
    dict: &KnowledgeDictionary,
) -> Result<String> {
    match style {
        RetrievalStyle::Explanation if triplets.is_empty() => Ok(NORMAL_REPORT.to_string()),
        RetrievalStyle::Explanation => Ok(triplets
            .iter()
            .map(|t| {
                render_structured_label(t, dict, RenderMode::FgEntityPlusExplanation, LookupPolicy::Fallback).map(|l| l.text)
            })
            .collect::<Result<Vec<_>>>()?
            .join(". ")),
        RetrievalStyle::PromptTemplate => Ok(categories
            .iter()
            .map(|c| prompt_text(&normalize_category(c)))
            .collect::<Vec<_>>()
            .join(". ")),
    }
}

/// Relevance: the two studies share a category.
pub fn category_relevance(categories: &[Vec<String>]) -> Array2<bool> {
    let sets: Vec<BTreeSet<String>> = categories
        .iter()
        .map(|c| c.iter().map(|x| normalize_category(x)).collect())
        .collect();
    Array2::from_shape_fn((sets.len(), sets.len()), |(i, j)| !sets[i].is_disjoint(&sets[j]))
}

/// Every image queries the documents of all studies; returns P@k per `k`.
pub fn retrieval_eval(
    model: &DualEncoder,
    images: &[ImageTensor],
    triplets: &[Vec<DiseaseTriplet>],
    categories: &[Vec<String>],
    dict: &KnowledgeDictionary,
    style: RetrievalStyle,
    ks: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    if images.len() != triplets.len() || images.len() != categories.len() {
        return Err(Error::Shape(format!(
            "{} images, {} triplet lists, {} category lists",
            images.len(),
            triplets.len(),
            categories.len()
        )));
    }
    let docs = triplets
        .iter()
        .zip(categories)
        .map(|(t, c)| study_document(t, c, style, dict))
        .collect::<Result<Vec<_>>>()?;
    let sim = score_embedded(model, &model.encode_images(images)?, &docs)?;
    let relevance = category_relevance(categories);
    ks.iter().map(|&k| Ok((k, precision_at_k(&sim, &relevance, k)?))).collect()
}
