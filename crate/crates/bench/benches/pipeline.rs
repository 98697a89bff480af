use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fgvl_core::corpus::{generate_synthetic_corpus, SyntheticSpec};
use fgvl_core::evaluator::{best_f1_threshold, precision_at_k};
use fgvl_core::extractor::{fallback_extract, parse_llm_response, Lexicon, PromptConfig};
use fgvl_core::model::{itm_loss, DualEncoder, LossMode, ModelConfig, Vocab};
use fgvl_core::ssm::{brute_force_ssm, compute_ssm, GroupedLabels, HashedBagOfWords};

const REPORT: &str = "There is a small left-sided pleural effusion. Mild cardiomegaly. \
    No pneumothorax. Patchy right lower lobe opacity concerning for pneumonia.";

fn label_groups(n: usize, rng: &mut ChaCha8Rng) -> GroupedLabels {
    let words = ["mild", "left", "effusion", "pneumonia", "white", "area", "hazy", "ring", "severe", "band"];
    let groups = (0..n)
        .map(|_| {
            (0..rng.random_range(1..=4))
                .map(|_| (0..6).map(|_| words[rng.random_range(0..words.len())]).collect::<Vec<_>>().join(" "))
                .collect()
        })
        .collect();
    GroupedLabels::new(groups).unwrap()
}

fn ssm(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let labels = label_groups(32, &mut rng);
    let provider = HashedBagOfWords::default();
    c.bench_function("compute_ssm/32 groups", |b| b.iter(|| compute_ssm(black_box(&labels), &provider).unwrap()));
    let small = label_groups(8, &mut rng);
    c.bench_function("brute_force_ssm/8 groups", |b| b.iter(|| brute_force_ssm(black_box(&small), &provider).unwrap()));
}

fn loss(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let y = Array2::from_shape_fn((32, 80), |_| rng.random_range(-1.0..1.0));
    let s = Array2::from_shape_fn((32, 80), |_| rng.random_range(0.0..1.0));
    c.bench_function("itm_loss/32x80", |b| b.iter(|| itm_loss(black_box(&y), &s, LossMode::Canonical).unwrap()));
}

fn train_step(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let texts: Vec<String> = (0..12).map(|i| format!("mild left syn-{i} bright round spot and patchy texture")).collect();
    let vocab = Vocab::build(texts.iter().map(String::as_str));
    let model = DualEncoder::init(&ModelConfig::default(), vocab, 0.0, 1.0, &mut rng).unwrap();
    let images: Vec<Vec<f64>> = (0..8).map(|_| (0..64 * 64).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let refs: Vec<&[f64]> = images.iter().map(Vec::as_slice).collect();
    let s = Array2::from_shape_fn((8, 12), |(i, j)| if j / 2 == i { 1.0 } else { 0.0 });
    let mut group = c.benchmark_group("dual_encoder");
    group.sample_size(10);
    group.bench_function("step/8 images 12 labels", |b| {
        b.iter(|| model.step(black_box(&refs), &texts, &s, LossMode::Canonical, 1.0).unwrap())
    });
    group.finish();
}

fn metrics(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let scores: Vec<f64> = (0..400).map(|_| rng.random_range(-1.0..1.0)).collect();
    let labels: Vec<bool> = (0..400).map(|i| i % 5 == 0).collect();
    c.bench_function("best_f1_threshold/400", |b| b.iter(|| best_f1_threshold(black_box(&scores), &labels).unwrap()));
    let sim = Array2::from_shape_fn((400, 400), |_| rng.random_range(-1.0..1.0));
    let rel = Array2::from_shape_fn((400, 400), |(i, j)| (i + j) % 7 == 0);
    c.bench_function("precision_at_k/400x400 k=5", |b| b.iter(|| precision_at_k(black_box(&sim), &rel, 5).unwrap()));
}

fn extraction(c: &mut Criterion) {
    let lexicon = Lexicon::default();
    c.bench_function("fallback_extract/report", |b| b.iter(|| fallback_extract(black_box(REPORT), &lexicon)));
    let response = "1. small|left-sided|pleural effusion\n- mild|None|cardiomegaly\n|right lower lobe|pneumonia\nchatter";
    let config = PromptConfig::default();
    c.bench_function("parse_llm_response/4 lines", |b| b.iter(|| parse_llm_response(black_box(response), &config)));
}

fn synthetic(c: &mut Criterion) {
    let spec = SyntheticSpec {
        n_train: 50,
        n_eval: 10,
        ..SyntheticSpec::default()
    };
    let mut group = c.benchmark_group("corpus");
    group.sample_size(10);
    group.bench_function("synthetic/60 studies 64x64", |b| b.iter(|| generate_synthetic_corpus(black_box(&spec)).unwrap()));
    group.finish();
}

criterion_group!(benches, ssm, loss, train_step, metrics, extraction, synthetic);
criterion_main!(benches);
