use serde::{Deserialize, Serialize};

use super::dictionary::{KnowledgeDictionary, LookupPolicy};
use crate::corpus::NORMAL_REPORT;
use crate::error::{Error, Result};
use crate::triplet::DiseaseTriplet;

/// How much of a finding a label carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderMode {
    /// Category only.
    Entity,
    /// `severity location category`, absent fields omitted.
    FgEntity,
    /// Fine-grained entity followed by `, where {category} is {explanation}`.
    #[default]
    FgEntityPlusExplanation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredLabel {
    pub text: String,
    pub triplet: DiseaseTriplet,
    pub explanation: Option<String>,
}

impl StructuredLabel {
    /// Label of a study without findings.
    pub fn normal() -> Self {
        Self {
            text: NORMAL_REPORT.to_string(),
            triplet: DiseaseTriplet::category_only(NORMAL_REPORT).expect("non-empty"),
            explanation: None,
        }
    }

    /// A free-text label (used when entity extraction is switched off).
    pub fn free_text(text: &str, category: &str) -> Result<Self> {
        let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
        if text.is_empty() {
            return Err(Error::InvalidTriplet("empty label text".into()));
        }
        Ok(Self {
            text,
            triplet: DiseaseTriplet::category_only(category)?,
            explanation: None,
        })
    }
}

/// Text of a label from its parts. `explanation` is only used in
/// [`RenderMode::FgEntityPlusExplanation`].
pub fn compose_label_text(triplet: &DiseaseTriplet, explanation: Option<&str>, mode: RenderMode) -> String {
    match mode {
        RenderMode::Entity => triplet.category().to_string(),
        RenderMode::FgEntity | RenderMode::FgEntityPlusExplanation => {
            let entity = [triplet.severity(), triplet.location(), Some(triplet.category())]
                .into_iter()
                .flatten()
                .collect::<Vec<_>>()
                .join(" ");
            match (mode, explanation) {
                (RenderMode::FgEntityPlusExplanation, Some(e)) => {
                    format!("{entity}, where {} is {e}", triplet.category())
                }
                _ => entity,
            }
        }
    }
}

pub fn render_structured_label(
    triplet: &DiseaseTriplet,
    dict: &KnowledgeDictionary,
    mode: RenderMode,
    policy: LookupPolicy,
) -> Result<StructuredLabel> {
    let explanation = match mode {
        RenderMode::FgEntityPlusExplanation => match (dict.get(triplet.category()), policy) {
            (Some(e), _) => Some(e.to_string()),
            // a miss degrades the label to the fine-grained entity alone
            (None, LookupPolicy::Fallback) => None,
            (None, LookupPolicy::Strict) => {
                return Err(Error::UnknownCategory(triplet.category().to_string()))
            }
        },
        _ => None,
    };
    Ok(StructuredLabel {
        text: compose_label_text(triplet, explanation.as_deref(), mode),
        triplet: triplet.clone(),
        explanation,
    })
}
