//! Held-out category evaluation on balanced positive/negative sets.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{best_f1_threshold, report_from_classes, ClassMetrics, EvalReport};
use super::zero_shot::score_embedded;
use crate::corpus::ImageTensor;
use crate::error::{Error, Result};
use crate::knowledge::{render_structured_label, KnowledgeDictionary, LookupPolicy, RenderMode};
use crate::model::DualEncoder;
use crate::triplet::{normalize_category, DiseaseTriplet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnseenMode {
    /// Score against the name of a related seen category.
    Category,
    /// Score against the held-out category's explanation label.
    Explanation,
}

/// Text scored for `held_out` in `mode`.
pub fn unseen_query_text(
    held_out: &str,
    mode: UnseenMode,
    proxies: &BTreeMap<String, String>,
    dict: &KnowledgeDictionary,
) -> Result<String> {
    match mode {
        UnseenMode::Explanation => {
            let t = DiseaseTriplet::category_only(held_out)?;
            Ok(render_structured_label(&t, dict, RenderMode::FgEntityPlusExplanation, LookupPolicy::Strict)?.text)
        }
        UnseenMode::Category => proxies
            .get(held_out)
            .map(|p| normalize_category(p))
            .ok_or_else(|| Error::Config(format!("no proxy category for `{held_out}`"))),
    }
}

/// Per held-out category: all positives plus an equal number of negatives
/// drawn (seeded) from samples without any held-out category. Chance
/// accuracy is the majority rate of that set.
#[allow(clippy::too_many_arguments)]
pub fn unseen_category_eval(
    model: &DualEncoder,
    images: &[ImageTensor],
    sample_categories: &[Vec<String>],
    held_out: &[String],
    training_categories: &BTreeSet<String>,
    proxies: &BTreeMap<String, String>,
    dict: &KnowledgeDictionary,
    mode: UnseenMode,
    seed: u64,
) -> Result<EvalReport> {
    if images.len() != sample_categories.len() {
        return Err(Error::Shape(format!("{} images, {} category lists", images.len(), sample_categories.len())));
    }
    let held: Vec<String> = held_out.iter().map(|h| normalize_category(h)).collect();
    if let Some(h) = held.iter().find(|h| training_categories.contains(*h)) {
        return Err(Error::Config(format!("held-out category `{h}` appears in the training manifest")));
    }
    let cats: Vec<BTreeSet<String>> = sample_categories
        .iter()
        .map(|c| c.iter().map(|x| normalize_category(x)).collect())
        .collect();
    let texts = held
        .iter()
        .map(|h| unseen_query_text(h, mode, proxies, dict))
        .collect::<Result<Vec<_>>>()?;
    let embeddings = model.encode_images(images)?;
    let scores = score_embedded(model, &embeddings, &texts)?;

    let clean: Vec<usize> = (0..images.len())
        .filter(|&i| held.iter().all(|h| !cats[i].contains(h)))
        .collect();
    let mut per_class = Vec::new();
    let mut extras = BTreeMap::new();
    for (c, h) in held.iter().enumerate() {
        let positives: Vec<usize> = (0..images.len()).filter(|&i| cats[i].contains(h)).collect();
        if positives.is_empty() {
            log::warn!("held-out category `{h}` has no positives and is excluded");
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut negatives = clean.clone();
        negatives.shuffle(&mut rng);
        negatives.truncate(positives.len());
        let members: Vec<usize> = positives.iter().chain(&negatives).copied().collect();
        let s: Vec<f64> = members.iter().map(|&i| scores[[i, c]]).collect();
        let labels: Vec<bool> = (0..members.len()).map(|k| k < positives.len()).collect();
        let choice = best_f1_threshold(&s, &labels)?;
        let chance = positives.len().max(negatives.len()) as f64 / members.len() as f64;
        extras.insert(format!("chance.{h}"), chance);
        per_class.push(ClassMetrics {
            class: h.clone(),
            threshold: choice.threshold,
            f1: choice.f1,
            accuracy: choice.accuracy,
            positives: positives.len(),
            negatives: negatives.len(),
        });
    }
    let mut report = report_from_classes(per_class, images.len())?;
    let chance = extras.values().sum::<f64>() / extras.len() as f64;
    report.extras = extras;
    report.extras.insert("chance".into(), chance);
    Ok(report)
}
