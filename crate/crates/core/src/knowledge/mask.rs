use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::render::StructuredLabel;
use crate::triplet::normalize_category;

pub const MASK_TOKEN: &str = "[MASK]";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskOutcome {
    pub text: String,
    pub masked: usize,
    /// Tokens eligible for masking (everything except category tokens).
    pub eligible: usize,
}

fn is_category_token(token: &str, category_words: &[&str]) -> bool {
    let core = token
        .trim_matches(|c: char| !c.is_alphanumeric() && c != '-')
        .to_lowercase();
    !core.is_empty()
        && (category_words.contains(&core.as_str())
            || category_words.contains(&normalize_category(&core).as_str()))
}

/// Replace each whitespace token with [`MASK_TOKEN`] independently with
/// probability `mask_prob`; tokens of the label's category are never masked.
pub fn mask_with_rng(label: &StructuredLabel, mask_prob: f64, rng: &mut impl Rng) -> MaskOutcome {
    let category_words: Vec<&str> = label.triplet.category().split(' ').collect();
    let mut masked = 0;
    let mut eligible = 0;
    let tokens: Vec<&str> = label
        .text
        .split_whitespace()
        .map(|tok| {
            if is_category_token(tok, &category_words) {
                return tok;
            }
            eligible += 1;
            if rng.random::<f64>() < mask_prob {
                masked += 1;
                MASK_TOKEN
            } else {
                tok
            }
        })
        .collect();
    MaskOutcome {
        text: tokens.join(" "),
        masked,
        eligible,
    }
}

/// Deterministic masking from a seed.
pub fn mask_text(label: &StructuredLabel, mask_prob: f64, rng_seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    mask_with_rng(label, mask_prob, &mut rng).text
}
