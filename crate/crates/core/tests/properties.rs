//! Property tests over randomly generated inputs.

use std::collections::BTreeSet;
use std::sync::Arc;

use ndarray::Array2;
use proptest::collection::vec;
use proptest::prelude::*;

use fgvl_core::corpus::{generate_synthetic_corpus, load_manifest, write_manifest, Corpus, ImageRef, ImageTensor, Study, SyntheticSpec};
use fgvl_core::evaluator::{best_f1_threshold, candidate_thresholds, macro_metrics, precision_at_k};
use fgvl_core::extractor::{
    extract_triplets, parse_llm_response, render_response, ExtractionCache, FixtureClient, PromptConfig, RetryPolicy,
};
use fgvl_core::knowledge::{
    lookup_explanation, mask_text, render_structured_label, KnowledgeDictionary, LookupPolicy, RenderMode,
};
use fgvl_core::model::{itm_loss, normalize_rows, similarity_matrix, LossMode};
use fgvl_core::ssm::{compute_ssm, EmbeddingProvider, GroupedLabels, HashedBagOfWords};
use fgvl_core::DiseaseTriplet;

const SEVERITIES: &[&str] = &["mild", "moderate", "severe", "small", "large", "trace"];
const LOCATIONS: &[&str] = &["left", "right", "bilateral", "left lower lobe", "right upper lobe", "basilar"];
const CATEGORIES: &[&str] = &[
    "pneumonia",
    "pleural effusion",
    "edema",
    "cardiomegaly",
    "atelectasis",
    "pneumothorax",
    "nodule",
    "covid-19",
    "consolidation",
    "fibrosis",
];

fn triplet() -> impl Strategy<Value = DiseaseTriplet> {
    (
        proptest::option::of(0..SEVERITIES.len()),
        proptest::option::of(0..LOCATIONS.len()),
        0..CATEGORIES.len(),
    )
        .prop_map(|(s, l, c)| {
            DiseaseTriplet::new(s.map(|i| SEVERITIES[i]), l.map(|i| LOCATIONS[i]), CATEGORIES[c]).unwrap()
        })
}

fn label_text() -> impl Strategy<Value = String> {
    vec(prop::sample::select(vec!["mild", "left", "effusion", "pneumonia", "white", "area", "hazy", "ring"]), 1..5)
        .prop_map(|w| w.join(" "))
}

fn groups() -> impl Strategy<Value = Vec<Vec<String>>> {
    vec(vec(label_text(), 1..4), 1..6)
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    d / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // ------------------------------------------------------------ corpus

    #[test]
    fn manifest_round_trip(reports in vec("[a-z ]{1,30}", 1..6), fill in 0.0f32..1.0) {
        let dir = tempfile::tempdir().unwrap();
        let studies: Vec<Study> = reports
            .iter()
            .enumerate()
            .map(|(i, r)| Study {
                id: format!("s{i}"),
                image: ImageRef::Inline(Arc::new(ImageTensor::filled(3, 4, fill + i as f32 * 0.01))),
                report_text: format!("x{r}"),
                gold_triplets: (i % 2 == 0).then(|| vec![DiseaseTriplet::new(Some("mild"), None, "edema").unwrap()]),
                gold_categories: (i % 3 == 0).then(|| vec!["edema".to_string()]),
            })
            .collect();
        let corpus = Corpus::new(studies).unwrap();
        let path = dir.path().join("m.jsonl");
        write_manifest(&corpus, &path).unwrap();
        let back = load_manifest(&path).unwrap();
        prop_assert_eq!(back.len(), corpus.len());
        for (a, b) in corpus.iter().zip(back.iter()) {
            prop_assert_eq!(&a.id, &b.id);
            prop_assert_eq!(&a.report_text, &b.report_text);
            prop_assert_eq!(&a.gold_triplets, &b.gold_triplets);
            prop_assert_eq!(&a.gold_categories, &b.gold_categories);
            prop_assert_eq!(a.load_image().unwrap(), b.load_image().unwrap());
        }
    }

    #[test]
    fn synthetic_corpus_is_deterministic(seed in any::<u64>()) {
        let spec = SyntheticSpec { n_train: 12, n_eval: 6, image_size: 16, seed, ..SyntheticSpec::default() };
        let (a_train, a_eval) = generate_synthetic_corpus(&spec).unwrap();
        let (b_train, b_eval) = generate_synthetic_corpus(&spec).unwrap();
        for (a, b) in a_train.iter().chain(a_eval.iter()).zip(b_train.iter().chain(b_eval.iter())) {
            prop_assert_eq!(&a.report_text, &b.report_text);
            prop_assert_eq!(a.load_image().unwrap(), b.load_image().unwrap());
            prop_assert!(!a.gold_categories.as_ref().unwrap().is_empty());
        }
    }

    // ------------------------------------------------------------ extractor

    #[test]
    fn parsed_triplets_are_valid(text in "(?s).{0,200}") {
        let out = parse_llm_response(&text, &PromptConfig::default());
        for t in &out.triplets {
            // re-validating a parsed triplet is a no-op
            let again = DiseaseTriplet::new(t.severity(), t.location(), t.category()).unwrap();
            prop_assert_eq!(&again, t);
        }
    }

    #[test]
    fn pipe_lines_never_panic(fields in vec("[ |a-zA-Z\\-]{0,12}", 0..12)) {
        let text = fields.join("|");
        let _ = parse_llm_response(&text, &PromptConfig::default());
    }

    #[test]
    fn render_then_parse_is_identity(ts in vec(triplet(), 0..8)) {
        let mut seen = BTreeSet::new();
        let ts: Vec<DiseaseTriplet> = ts.into_iter().filter(|t| seen.insert(t.clone())).collect();
        let parsed = parse_llm_response(&render_response(&ts), &PromptConfig::default());
        prop_assert_eq!(parsed.triplets, ts);
        prop_assert_eq!(parsed.skipped_lines, 0);
    }

    #[test]
    fn cached_extraction_is_stable(ts in vec(triplet(), 0..4), report in "[a-z]{1,20}") {
        let config = PromptConfig::default();
        let prompt = fgvl_core::extractor::build_prompt(&report, &config).unwrap();
        let client = FixtureClient::new("fx").with_response(&prompt, render_response(&ts));
        let study = Study {
            id: "s".into(),
            image: ImageRef::Inline(Arc::new(ImageTensor::filled(2, 2, 0.0))),
            report_text: report,
            gold_triplets: None,
            gold_categories: None,
        };
        let cache = ExtractionCache::in_memory();
        let retry = RetryPolicy { max_attempts: 1, base_delay: std::time::Duration::ZERO };
        let a = extract_triplets(&study, &client, &cache, &config, &retry).unwrap();
        let b = extract_triplets(&study, &client, &cache, &config, &retry).unwrap();
        prop_assert_eq!(a.triplets, b.triplets);
        prop_assert_eq!(client.calls(), 1);
    }

    // ------------------------------------------------------------ knowledge

    #[test]
    fn rendering_separates_categories(a in triplet(), b in triplet()) {
        prop_assume!(a.category() != b.category());
        let dict = KnowledgeDictionary::shipped();
        for mode in [RenderMode::Entity, RenderMode::FgEntity, RenderMode::FgEntityPlusExplanation] {
            let ra = render_structured_label(&a, &dict, mode, LookupPolicy::Fallback).unwrap();
            let rb = render_structured_label(&b, &dict, mode, LookupPolicy::Fallback).unwrap();
            prop_assert_ne!(ra.text, rb.text);
        }
    }

    #[test]
    fn masking_keeps_token_count(t in triplet(), p in 0.0f64..=1.0, seed in any::<u64>()) {
        let dict = KnowledgeDictionary::shipped();
        let label = render_structured_label(&t, &dict, RenderMode::FgEntityPlusExplanation, LookupPolicy::Fallback).unwrap();
        let masked = mask_text(&label, p, seed);
        prop_assert_eq!(masked.split_whitespace().count(), label.text.split_whitespace().count());
        prop_assert_eq!(mask_text(&label, 0.0, seed), label.text.split_whitespace().collect::<Vec<_>>().join(" "));
        prop_assert_eq!(mask_text(&label, p, seed), masked);
    }

    #[test]
    fn dictionary_lookup_is_pure(c in 0..CATEGORIES.len()) {
        let dict = KnowledgeDictionary::shipped();
        let a = lookup_explanation(CATEGORIES[c], &dict, LookupPolicy::Fallback).unwrap();
        let b = lookup_explanation(CATEGORIES[c], &dict, LookupPolicy::Fallback).unwrap();
        prop_assert_eq!(a, b);
    }

    // ------------------------------------------------------------ ssm

    #[test]
    fn ssm_structure(g in groups()) {
        let provider = HashedBagOfWords::default();
        let labels = GroupedLabels::new(g.clone()).unwrap();
        let s = compute_ssm(&labels, &provider).unwrap();
        let flat: Vec<&String> = g.iter().flatten().collect();
        let emb: Vec<Vec<f64>> = flat.iter().map(|t| provider.embed(t).unwrap()).collect();
        for i in 0..labels.n() {
            for j in 0..flat.len() {
                let v = s.values[[i, j]];
                prop_assert!((0.0..=1.0).contains(&v));
                if labels.block(i).contains(&j) {
                    prop_assert_eq!(v, 1.0);
                }
                for t in labels.block(i) {
                    prop_assert!(v >= cos(&emb[t], &emb[j]).min(1.0) - 1e-12);
                }
            }
        }
        for a in 0..flat.len() {
            for b in 0..flat.len() {
                if flat[a] == flat[b] {
                    prop_assert_eq!(s.values.column(a), s.values.column(b));
                }
            }
        }
    }

    #[test]
    fn ssm_permutation_within_a_group(g in groups(), pick in any::<prop::sample::Index>(), rot in 1usize..4) {
        let provider = HashedBagOfWords::default();
        let i = pick.index(g.len());
        let mut h = g.clone();
        let len = h[i].len();
        h[i].rotate_left(rot % len);
        let a = compute_ssm(&GroupedLabels::new(g.clone()).unwrap(), &provider).unwrap();
        let lb = GroupedLabels::new(h).unwrap();
        let b = compute_ssm(&lb, &provider).unwrap();
        let block = lb.block(i);
        for r in 0..g.len() {
            for j in 0..a.values.ncols() {
                let jb = if block.contains(&j) {
                    block.start + (j - block.start + len - rot % len) % len
                } else {
                    j
                };
                prop_assert_eq!(a.values[[r, j]], b.values[[r, jb]]);
            }
        }
    }

    // ------------------------------------------------------------ model

    #[test]
    fn loss_is_non_negative(
        (n, m, y, s) in (1usize..5, 1usize..6).prop_flat_map(|(n, m)| {
            (Just(n), Just(m), vec(-1.0f64..=1.0, n * m), vec(0.0f64..=1.0, n * m))
        })
    ) {
        let y = Array2::from_shape_vec((n, m), y).unwrap();
        let s = Array2::from_shape_vec((n, m), s).unwrap();
        for mode in [LossMode::Canonical, LossMode::Literal] {
            prop_assert!(itm_loss(&y, &s, mode).unwrap().0 >= 0.0);
        }
    }

    #[test]
    fn temperature_keeps_argmax_and_scale_is_absorbed(
        (n, m, d, a, b) in (1usize..4, 2usize..5, 2usize..5).prop_flat_map(|(n, m, d)| {
            (Just(n), Just(m), Just(d), vec(-1.0f64..1.0, n * d), vec(-1.0f64..1.0, m * d))
        }),
        t1 in 0.05f64..5.0, t2 in 0.05f64..5.0, scale in 0.1f64..10.0,
    ) {
        let a = Array2::from_shape_vec((n, d), a).unwrap();
        let b = Array2::from_shape_vec((m, d), b).unwrap();
        prop_assume!(a.rows().into_iter().all(|r| r.dot(&r) > 1e-6) && b.rows().into_iter().all(|r| r.dot(&r) > 1e-6));
        let (ua, _) = normalize_rows(&a).unwrap();
        let (ub, _) = normalize_rows(&b).unwrap();
        let y1 = similarity_matrix(&ua, &ub, t1).unwrap();
        let y2 = similarity_matrix(&ua, &ub, t2).unwrap();
        let argmax = |y: &Array2<f64>| -> Vec<usize> {
            y.rows().into_iter().map(|r| {
                (0..r.len()).fold(0, |best, j| if r[j] > r[best] { j } else { best })
            }).collect()
        };
        prop_assert_eq!(argmax(&y1), argmax(&y2));
        let mut scaled = a.clone();
        scaled.row_mut(0).mapv_inplace(|v| v * scale);
        let (us, _) = normalize_rows(&scaled).unwrap();
        let y3 = similarity_matrix(&us, &ub, t1).unwrap();
        for (p, q) in y1.iter().zip(y3.iter()) {
            prop_assert!((p - q).abs() <= 1e-12 * (1.0 + p.abs()) / t1.min(1.0));
        }
    }

    // ------------------------------------------------------------ evaluator

    #[test]
    fn best_threshold_is_optimal_and_monotone_invariant(
        pairs in vec((0u8..8, any::<bool>()), 1..12)
    ) {
        prop_assume!(pairs.iter().any(|p| p.1));
        let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 7.0).collect();
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        let best = best_f1_threshold(&scores, &labels).unwrap();
        let f1_at = |t: f64| {
            let tp = scores.iter().zip(&labels).filter(|(s, l)| **s > t && **l).count();
            let fp = scores.iter().zip(&labels).filter(|(s, l)| **s > t && !**l).count();
            let fneg = labels.iter().filter(|l| **l).count() - tp;
            if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fneg) as f64 }
        };
        for t in candidate_thresholds(&scores) {
            prop_assert!(best.f1 >= f1_at(t) - 1e-15);
        }
        let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        let w = best_f1_threshold(&warped, &labels).unwrap();
        prop_assert_eq!(w.f1, best.f1);
        prop_assert_eq!(w.accuracy, best.accuracy);
        let part: Vec<bool> = scores.iter().map(|s| *s > best.threshold).collect();
        let wpart: Vec<bool> = warped.iter().map(|s| *s > w.threshold).collect();
        prop_assert_eq!(part, wpart);
    }

    #[test]
    fn precision_at_k_is_bounded_and_monotone(
        (q, d, sim, rel) in (1usize..4, 1usize..8).prop_flat_map(|(q, d)| {
            (Just(q), Just(d), vec(0u8..5, q * d), vec(any::<bool>(), q * d))
        }),
        k_pick in any::<prop::sample::Index>(), flip in any::<prop::sample::Index>(),
    ) {
        let sim = Array2::from_shape_vec((q, d), sim.into_iter().map(f64::from).collect()).unwrap();
        let rel = Array2::from_shape_vec((q, d), rel).unwrap();
        let k = k_pick.index(d) + 1;
        let p = precision_at_k(&sim, &rel, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        let mut more = rel.clone();
        let f = flip.index(q * d);
        more[[f / d, f % d]] = true;
        prop_assert!(precision_at_k(&sim, &more, k).unwrap() >= p);
    }

    #[test]
    fn macro_metrics_ignore_class_order(
        (n, c, scores, gold) in (2usize..10, 2usize..5).prop_flat_map(|(n, c)| {
            (Just(n), Just(c), vec(0u8..6, n * c), vec(any::<bool>(), n * c))
        })
    ) {
        let mut gold = Array2::from_shape_vec((n, c), gold).unwrap();
        for j in 0..c {
            gold[[j % n, j]] = true;
        }
        let scores = Array2::from_shape_vec((n, c), scores.into_iter().map(f64::from).collect()).unwrap();
        let classes: Vec<String> = (0..c).map(|j| format!("c{j}")).collect();
        let a = macro_metrics(&scores, &gold, &classes).unwrap();
        let order: Vec<usize> = (0..c).rev().collect();
        let rs = Array2::from_shape_fn((n, c), |(i, j)| scores[[i, order[j]]]);
        let rg = Array2::from_shape_fn((n, c), |(i, j)| gold[[i, order[j]]]);
        let rc: Vec<String> = order.iter().map(|&j| classes[j].clone()).collect();
        let b = macro_metrics(&rs, &rg, &rc).unwrap();
        prop_assert!((a.macro_f1 - b.macro_f1).abs() < 1e-12);
        prop_assert!((a.macro_accuracy - b.macro_accuracy).abs() < 1e-12);
        for m in &a.per_class {
            prop_assert_eq!(Some(m), b.class(&m.class));
        }
    }
}
