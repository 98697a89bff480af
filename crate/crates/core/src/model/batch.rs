//! Per-study label rendering and batch assembly.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::Rng;

use super::config::{Switches, TrainConfig};
use crate::corpus::{Corpus, ImageTensor, NORMAL_CATEGORY};
use crate::error::{Error, Result};
use crate::knowledge::{mask_with_rng, render_structured_label, KnowledgeDictionary, LookupPolicy, RenderMode, StructuredLabel};
use crate::ssm::{compute_ssm, EmbeddingProvider, GroupedLabels, SimilarityMatrix};
use crate::triplet::DiseaseTriplet;

/// One image with its report and extracted findings. `triplets: None` means
/// extraction never produced anything for the study; `Some(vec![])` is a
/// normal study.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub id: String,
    pub image: ImageTensor,
    pub report_text: String,
    pub triplets: Option<Vec<DiseaseTriplet>>,
}

impl TrainExample {
    /// Load every image of `corpus`. Triplets come from `extracted` when it
    /// has the study, else from the study's gold triplets.
    pub fn from_corpus(corpus: &Corpus, extracted: Option<&HashMap<String, Vec<DiseaseTriplet>>>) -> Result<Vec<Self>> {
        corpus
            .iter()
            .map(|s| {
                Ok(Self {
                    id: s.id.clone(),
                    image: s.load_image()?,
                    report_text: s.report_text.clone(),
                    triplets: extracted
                        .and_then(|m| m.get(&s.id).cloned())
                        .or_else(|| s.gold_triplets.clone()),
                })
            })
            .collect()
    }
}

/// Render mode implied by the fine-grained and knowledge switches.
pub fn render_mode(switches: &Switches) -> RenderMode {
    match (switches.use_fg, switches.use_iki) {
        (true, true) | (false, true) => RenderMode::FgEntityPlusExplanation,
        (true, false) => RenderMode::FgEntity,
        (false, false) => RenderMode::Entity,
    }
}

/// Structured labels of one study, duplicates removed.
pub fn study_labels(example: &TrainExample, dict: &KnowledgeDictionary, switches: &Switches) -> Result<Vec<StructuredLabel>> {
    let triplets = example
        .triplets
        .as_ref()
        .ok_or_else(|| Error::NoLabels(example.id.clone()))?;
    if !switches.use_entity {
        let category = triplets.first().map_or(NORMAL_CATEGORY, |t| t.category());
        return StructuredLabel::free_text(&example.report_text, category)
            .map(|l| vec![l])
            .map_err(|_| Error::NoLabels(example.id.clone()));
    }
    if triplets.is_empty() {
        return Ok(vec![StructuredLabel::normal()]);
    }
    let mode = render_mode(switches);
    let mut labels: Vec<StructuredLabel> = Vec::with_capacity(triplets.len());
    for t in triplets {
        // knowledge without qualifiers: explanation on the bare category
        let t = if switches.use_fg { t.clone() } else { t.entity() };
        let label = render_structured_label(&t, dict, mode, LookupPolicy::Fallback)?;
        if !labels.iter().any(|l| l.text == label.text) {
            labels.push(label);
        }
    }
    if labels.is_empty() {
        return Err(Error::NoLabels(example.id.clone()));
    }
    Ok(labels)
}

/// A batch ready for one optimization step.
#[derive(Debug, Clone)]
pub struct LabeledBatch {
    /// Unmasked labels, the basis of the targets.
    pub groups: GroupedLabels,
    /// Flattened label texts after masking, fed to the text tower.
    pub trainer_texts: Vec<String>,
    pub targets: SimilarityMatrix,
}

/// Build targets from unmasked labels, then mask the texts the model sees.
pub fn batch_from_labels(
    labels: &[&[StructuredLabel]],
    provider: &dyn EmbeddingProvider,
    config: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<LabeledBatch> {
    let groups = GroupedLabels::new(
        labels
            .iter()
            .map(|g| g.iter().map(|l| l.text.clone()).collect())
            .collect(),
    )?;
    let targets = if config.switches.use_ssm {
        compute_ssm(&groups, provider)?
    } else {
        SimilarityMatrix::block_membership(&groups.row_counts())
    };
    let trainer_texts = labels
        .iter()
        .flat_map(|g| g.iter())
        .map(|l| {
            if config.mask_prob > 0.0 {
                mask_with_rng(l, config.mask_prob, rng).text
            } else {
                l.text.clone()
            }
        })
        .collect();
    Ok(LabeledBatch {
        groups,
        trainer_texts,
        targets,
    })
}

pub fn assemble_batch(
    examples: &[&TrainExample],
    dict: &KnowledgeDictionary,
    provider: &dyn EmbeddingProvider,
    config: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<LabeledBatch> {
    let labels: Vec<Vec<StructuredLabel>> = examples
        .iter()
        .map(|e| study_labels(e, dict, &config.switches))
        .collect::<Result<_>>()?;
    let refs: Vec<&[StructuredLabel]> = labels.iter().map(Vec::as_slice).collect();
    batch_from_labels(&refs, provider, config, rng)
}

/// Remembers embeddings across batches. Labels repeat heavily between
/// batches, and providers are deterministic per text.
pub struct MemoProvider<'a> {
    inner: &'a dyn EmbeddingProvider,
    memo: Mutex<HashMap<String, Vec<f64>>>,
}

impl<'a> MemoProvider<'a> {
    pub fn new(inner: &'a dyn EmbeddingProvider) -> Self {
        Self {
            inner,
            memo: Mutex::new(HashMap::new()),
        }
    }
}

impl EmbeddingProvider for MemoProvider<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed(&self, text: &str) -> std::result::Result<Vec<f64>, String> {
        if let Some(v) = self.memo.lock().expect("memo lock poisoned").get(text) {
            return Ok(v.clone());
        }
        let v = self.inner.embed(text)?;
        self.memo
            .lock()
            .expect("memo lock poisoned")
            .insert(text.to_string(), v.clone());
        Ok(v)
    }

    fn concurrent(&self) -> bool {
        self.inner.concurrent()
    }
}
