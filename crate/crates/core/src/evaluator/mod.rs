//! Zero-shot classification, unseen-category evaluation, retrieval and
//! linear probing on top of a trained dual encoder.

mod metrics;
mod probe;
mod retrieval;
mod unseen;
mod zero_shot;

pub use metrics::{
    best_f1_threshold, candidate_thresholds, extended_float, macro_metrics, precision_at_k, ranking, report_from_classes,
    top_k_hit_rate, ClassMetrics, EvalReport, ThresholdChoice,
};
pub use probe::{linear_probe, stratified_subsample, ProbeConfig, ProbeData};
pub use retrieval::{category_relevance, retrieval_eval, study_document, RetrievalStyle};
pub use unseen::{unseen_category_eval, unseen_query_text, UnseenMode};
pub use zero_shot::{
    gold_matrix, prompt_text, score_embedded, score_texts, zero_shot_report, zero_shot_scores, CategoryLibrary,
    LibraryEntry, LibraryStyle, PROMPT_TEMPLATE,
};
