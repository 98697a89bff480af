//! Best-F1 thresholding, macro averages and Precision@K.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Decision rule: predict positive iff `score > threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    #[serde(with = "extended_float")]
    pub threshold: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Finite floats as numbers, infinities as `"inf"` / `"-inf"`.
pub mod extended_float {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad threshold `{t}`"))),
        }
    }
}

fn f1_from_counts(tp: usize, fp: usize, fneg: usize) -> f64 {
    if tp == 0 {
        0.0
    } else {
        (2 * tp) as f64 / (2 * tp + fp + fneg) as f64
    }
}

/// Candidate thresholds: `-inf`, midpoints between adjacent distinct sorted
/// scores, `+inf`.
pub fn candidate_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut out = Vec::with_capacity(sorted.len() + 1);
    out.push(f64::NEG_INFINITY);
    out.extend(sorted.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    out.push(f64::INFINITY);
    out
}

/// Threshold maximizing F1; ties go to higher accuracy, then to the lower
/// threshold.
pub fn best_f1_threshold(scores: &[f64], labels: &[bool]) -> Result<ThresholdChoice> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::Metric("F1 is undefined without positive labels".into()));
    }
    let n = labels.len();
    // sweep from the highest score down; every distinct score boundary is a
    // candidate, visited in decreasing threshold order
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let thresholds = candidate_thresholds(scores);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut cursor = 0;
    let mut best: Option<(ThresholdChoice, (usize, usize))> = None;
    for &t in thresholds.iter().rev() {
        while cursor < n && scores[idx[cursor]] > t {
            if labels[idx[cursor]] {
                tp += 1;
            } else {
                fp += 1;
            }
            cursor += 1;
        }
        let fneg = positives - tp;
        let tn = n - positives - fp;
        let choice = ThresholdChoice {
            threshold: t,
            f1: f1_from_counts(tp, fp, fneg),
            accuracy: (tp + tn) as f64 / n as f64,
        };
        // thresholds descend, so an equal candidate replaces the incumbent
        let better = match &best {
            None => true,
            Some((b, _)) => (choice.f1, choice.accuracy) >= (b.f1, b.accuracy),
        };
        if better {
            best = Some((choice, (tp, fp)));
        }
    }
    Ok(best.expect("at least two candidates").0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    #[serde(with = "extended_float")]
    pub threshold: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub positives: usize,
    pub negatives: usize,
}

/// Per-class metrics, their unweighted means, and run context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_f1: f64,
    pub macro_accuracy: f64,
    pub n_samples: usize,
    /// Classes skipped for lack of positives.
    #[serde(default)]
    pub excluded: Vec<String>,
    /// Named scalar side results (chance rates, Precision@K, ...).
    #[serde(default)]
    pub extras: BTreeMap<String, f64>,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn class(&self, name: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.class == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Independent best-F1 threshold per class; classes without positives are
/// excluded with a warning.
pub fn macro_metrics(scores: &Array2<f64>, gold: &Array2<bool>, classes: &[String]) -> Result<EvalReport> {
    if scores.dim() != gold.dim() {
        return Err(Error::Shape(format!("scores {:?} vs gold {:?}", scores.dim(), gold.dim())));
    }
    if classes.len() != scores.ncols() {
        return Err(Error::Shape(format!("{} class names for {} columns", classes.len(), scores.ncols())));
    }
    if gold.is_empty() {
        return Err(Error::Metric("empty gold matrix".into()));
    }
    let mut per_class = Vec::new();
    let mut excluded = Vec::new();
    for (c, name) in classes.iter().enumerate() {
        let labels: Vec<bool> = gold.column(c).to_vec();
        let positives = labels.iter().filter(|&&l| l).count();
        if positives == 0 {
            log::warn!("class `{name}` has no positives and is excluded");
            excluded.push(name.clone());
            continue;
        }
        let col: Vec<f64> = scores.column(c).to_vec();
        let choice = best_f1_threshold(&col, &labels)?;
        per_class.push(ClassMetrics {
            class: name.clone(),
            threshold: choice.threshold,
            f1: choice.f1,
            accuracy: choice.accuracy,
            positives,
            negatives: labels.len() - positives,
        });
    }
    let mut report = report_from_classes(per_class, gold.nrows())?;
    report.excluded = excluded;
    Ok(report)
}

/// Macro averages over already-computed class results.
pub fn report_from_classes(per_class: Vec<ClassMetrics>, n_samples: usize) -> Result<EvalReport> {
    if per_class.is_empty() {
        return Err(Error::Metric("no class has a positive label".into()));
    }
    let k = per_class.len() as f64;
    Ok(EvalReport {
        macro_f1: per_class.iter().map(|c| c.f1).sum::<f64>() / k,
        macro_accuracy: per_class.iter().map(|c| c.accuracy).sum::<f64>() / k,
        per_class,
        n_samples,
        excluded: Vec::new(),
        extras: BTreeMap::new(),
        config: serde_json::Value::Null,
    })
}

/// Descending order with ties kept in index order.
pub fn ranking(row: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
    idx
}

/// Mean over queries of the relevant fraction among the top `k` items.
pub fn precision_at_k(sim: &Array2<f64>, relevance: &Array2<bool>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Metric("k must be at least 1".into()));
    }
    if sim.dim() != relevance.dim() {
        return Err(Error::Shape(format!("similarity {:?} vs relevance {:?}", sim.dim(), relevance.dim())));
    }
    if k > sim.ncols() {
        return Err(Error::Metric(format!("k={k} exceeds {} documents", sim.ncols())));
    }
    if sim.nrows() == 0 {
        return Err(Error::Metric("no queries".into()));
    }
    if sim.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("retrieval similarities"));
    }
    let total: f64 = sim
        .rows()
        .into_iter()
        .zip(relevance.rows())
        .map(|(row, rel)| {
            let hits = ranking(&row.to_vec())[..k].iter().filter(|&&j| rel[j]).count();
            hits as f64 / k as f64
        })
        .sum();
    Ok(total / sim.nrows() as f64)
}

/// Fraction of samples whose best-scoring gold class ranks within the top
/// `k` columns. Samples without any gold class are skipped.
pub fn top_k_hit_rate(scores: &Array2<f64>, gold: &Array2<bool>, k: usize) -> f64 {
    let mut hits = 0;
    let mut counted = 0;
    for (row, g) in scores.rows().into_iter().zip(gold.rows()) {
        if !g.iter().any(|&x| x) {
            continue;
        }
        counted += 1;
        if ranking(&row.to_vec())[..k.min(row.len())].iter().any(|&j| g[j]) {
            hits += 1;
        }
    }
    if counted == 0 {
        0.0
    } else {
        hits as f64 / counted as f64
    }
}
