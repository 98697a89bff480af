//! Category explanations, structured-label rendering and text masking.

mod dictionary;
mod mask;
mod render;

pub use dictionary::{lookup_explanation, KnowledgeDictionary, LookupPolicy};
pub use mask::{mask_text, mask_with_rng, MaskOutcome, MASK_TOKEN};
pub use render::{compose_label_text, render_structured_label, RenderMode, StructuredLabel};
