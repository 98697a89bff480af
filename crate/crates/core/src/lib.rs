//! Fine-grained vision-language pretraining at desk scale.
//!
//! Pipeline: reports are reduced to `(severity, location, category)`
//! triplets, rendered into knowledge-enriched labels, scored against each
//! other to form soft similarity targets, and used to train a dual encoder
//! that is then evaluated zero-shot, on unseen categories, by retrieval and
//! by linear probing.

// `!(x > 0.0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod corpus;
pub mod error;
pub mod evaluator;
pub mod extractor;
pub mod knowledge;
pub mod model;
pub mod pipeline;
pub mod ssm;
pub mod triplet;

pub use config::{validate_config, RunConfig};
pub use error::{Error, Result};
pub use triplet::DiseaseTriplet;
