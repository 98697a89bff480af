//! Plain SGD over shuffled batches with a cosine warm-restart schedule.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::{batch_from_labels, study_labels, MemoProvider, TrainExample};
use super::checkpoint::{Checkpoint, RngState};
use super::config::{ModelConfig, TrainConfig};
use super::dual::DualEncoder;
use super::layers::Tensors;
use super::text::Vocab;
use crate::error::{Error, Result};
use crate::knowledge::{KnowledgeDictionary, StructuredLabel};
use crate::ssm::EmbeddingProvider;

const INIT_STREAM: u64 = 1;
const BATCH_STREAM: u64 = 2;
const CENTERING_SAMPLE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

/// Learning rate at fractional epoch `t`, restarting after `t_0`, then
/// `t_0·t_mult`, `t_0·t_mult²`, ... epochs.
pub fn lr_at(config: &TrainConfig, t: f64) -> f64 {
    let (t_cur, period) = if config.t_mult == 1.0 {
        (t % config.t_0, config.t_0)
    } else {
        let cycle = ((t / config.t_0 * (config.t_mult - 1.0) + 1.0).ln() / config.t_mult.ln()).floor();
        let start = config.t_0 * (config.t_mult.powf(cycle) - 1.0) / (config.t_mult - 1.0);
        (t - start, config.t_0 * config.t_mult.powf(cycle))
    };
    config.lr_min + (config.lr - config.lr_min) * (1.0 + (PI * t_cur / period).cos()) / 2.0
}

/// Labels, vocabulary, pixel statistics and the initial model.
pub struct Prepared {
    pub labels: Vec<Vec<StructuredLabel>>,
    pub model: DualEncoder,
}

pub fn prepare(
    examples: &[TrainExample],
    dict: &KnowledgeDictionary,
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<Prepared> {
    if examples.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let problems: Vec<String> = model_config.violations().into_iter().chain(config.violations()).collect();
    if !problems.is_empty() {
        return Err(Error::Config(problems.join("; ")));
    }
    let labels: Vec<Vec<StructuredLabel>> = examples
        .iter()
        .map(|e| study_labels(e, dict, &config.switches))
        .collect::<Result<_>>()?;
    let vocab = Vocab::build(labels.iter().flatten().map(|l| l.text.as_str()));

    let (mut sum, mut sum_sq, mut count) = (0.0, 0.0, 0usize);
    for e in examples {
        for &v in e.image.values() {
            sum += v as f64;
            sum_sq += (v as f64) * (v as f64);
        }
        count += e.image.values().len();
    }
    let mean = sum / count as f64;
    let std = (sum_sq / count as f64 - mean * mean).max(0.0).sqrt().max(1e-6);

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    init_rng.set_stream(INIT_STREAM);
    let mut model = DualEncoder::init(model_config, vocab, mean, std, &mut init_rng)?;
    center_projections(&mut model, examples, &labels)?;
    Ok(Prepared { labels, model })
}

/// Data-dependent bias init: projected features start centered over the
/// training images and label texts, so the towers do not begin with every
/// embedding pointing the same way.
fn center_projections(model: &mut DualEncoder, examples: &[TrainExample], labels: &[Vec<StructuredLabel>]) -> Result<()> {
    let sample: Vec<_> = examples.iter().take(CENTERING_SAMPLE).map(|e| e.image.clone()).collect();
    let feats = model.image_features(&sample)?;
    let mean = feats.mean_axis(ndarray::Axis(0)).expect("non-empty sample");
    model.params.proj_image.b = -mean.dot(&model.params.proj_image.w);

    let mut texts: Vec<&str> = labels.iter().flatten().map(|l| l.text.as_str()).collect();
    texts.sort_unstable();
    texts.dedup();
    let rows: Vec<f64> = texts
        .iter()
        .flat_map(|t| model.params.text.features(&model.vocab.encode(t)).to_vec())
        .collect();
    let feats = ndarray::Array2::from_shape_vec((texts.len(), model.params.text.d_out()), rows)
        .map_err(|e| Error::Shape(e.to_string()))?;
    let mean = feats.mean_axis(ndarray::Axis(0)).expect("non-empty labels");
    model.params.proj_text.b = -mean.dot(&model.params.proj_text.w);
    Ok(())
}

pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub log: Vec<LogRecord>,
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

fn snapshot(model: &DualEncoder, config: &TrainConfig, epoch: usize, rng: &ChaCha8Rng) -> Checkpoint {
    Checkpoint {
        model: model.clone(),
        train: config.clone(),
        epoch,
        rng: RngState::capture(config.seed, rng),
    }
}

/// Train from scratch. Single-threaded control flow; per-sample work inside
/// a step may fan out, but reductions run in a fixed order, so the result
/// depends only on the inputs and the seed.
pub fn train(
    examples: &[TrainExample],
    dict: &KnowledgeDictionary,
    provider: &dyn EmbeddingProvider,
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    let Prepared { labels, mut model } = prepare(examples, dict, model_config, config)?;
    let images: Vec<Vec<f64>> = examples
        .iter()
        .map(|e| model.standardize(&e.image))
        .collect::<Result<_>>()?;
    let provider = MemoProvider::new(provider);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(BATCH_STREAM);

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let steps_per_epoch = examples.len().div_ceil(config.batch_size);
    let mut log = Vec::new();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut step = 0;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let lr = lr_at(config, epoch as f64 + b as f64 / steps_per_epoch as f64);
            let group_refs: Vec<&[StructuredLabel]> = chunk.iter().map(|&i| labels[i].as_slice()).collect();
            let batch = batch_from_labels(&group_refs, &provider, config, &mut rng)?;
            let batch_images: Vec<&[f64]> = chunk.iter().map(|&i| images[i].as_slice()).collect();
            let out = model.step(
                &batch_images,
                &batch.trainer_texts,
                &batch.targets.values,
                config.loss_mode,
                config.temperature,
            );
            let out = match out {
                Ok(o) if o.loss.is_finite() && o.grads.tensors().iter().all(|(_, g)| g.iter().all(|v| v.is_finite())) => o,
                Ok(_) | Err(Error::NonFinite(_)) => {
                    return Err(Error::Diverged {
                        epoch,
                        step,
                        last_good: Box::new(snapshot(&model, config, epoch, &rng)),
                    })
                }
                Err(e) => return Err(e),
            };
            model.params.scaled_add(-lr, &out.grads);
            log.push(LogRecord {
                epoch,
                step,
                loss: out.loss,
                lr,
            });
            total += out.loss;
            batches += 1;
            step += 1;
        }
        let mean = total / batches.max(1) as f64;
        log::info!("epoch {epoch}: mean loss {mean:.5}");
        epoch_losses.push(mean);
    }
    Ok(TrainOutput {
        checkpoint: snapshot(&model, config, config.epochs, &rng),
        log,
        epoch_losses,
    })
}
