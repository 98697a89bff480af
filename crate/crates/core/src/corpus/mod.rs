//! Paired image/report studies: manifest IO and the synthetic generator.

mod image;
mod manifest;
mod synthetic;

pub use image::{ImageTensor, SIDECAR_HEADER_LEN, SIDECAR_MAGIC, SIDECAR_VERSION};
pub use manifest::{load_manifest, write_manifest, Corpus, ImageRef, Study};
pub use synthetic::{
    attribute_renderer, generate_synthetic_corpus, CategoryDef, Primitive, SyntheticSpec,
    NORMAL_CATEGORY, NORMAL_REPORT,
};
