//! Linear probe on frozen image features.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{macro_metrics, EvalReport};
use super::zero_shot::gold_matrix;
use crate::corpus::ImageTensor;
use crate::error::{Error, Result};
use crate::model::DualEncoder;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub lr: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            lr: 0.5,
            max_epochs: 200,
            patience: 10,
            seed: 0,
        }
    }
}

/// Seeded class-stratified subsample of `round(portion·N)` indices.
/// Per-stratum sizes use largest-remainder rounding; a stratum allotted
/// nothing is an error.
pub fn stratified_subsample(strata: &[String], portion: f64, seed: u64) -> Result<Vec<usize>> {
    if !(portion > 0.0 && portion <= 1.0) {
        return Err(Error::Config(format!("portion must be in (0, 1], got {portion}")));
    }
    let n = strata.len();
    let total = ((portion * n as f64).round() as usize).max(1);
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in strata.iter().enumerate() {
        groups.entry(s).or_default().push(i);
    }
    let mut alloc: Vec<(&str, usize, f64)> = groups
        .iter()
        .map(|(k, v)| {
            let exact = total as f64 * v.len() as f64 / n as f64;
            (*k, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut left = total - alloc.iter().map(|a| a.1).sum::<usize>();
    let mut order: Vec<usize> = (0..alloc.len()).collect();
    order.sort_by(|&a, &b| alloc[b].2.total_cmp(&alloc[a].2).then(a.cmp(&b)));
    for &k in order.iter().cycle().take(alloc.len() * 2) {
        if left == 0 {
            break;
        }
        alloc[k].1 += 1;
        left -= 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(total);
    for (key, count, _) in alloc {
        if count == 0 {
            return Err(Error::Stratification(format!(
                "class `{key}` gets no images at portion {portion} of {n}"
            )));
        }
        let mut members = groups[key].clone();
        members.shuffle(&mut rng);
        picked.extend_from_slice(&members[..count.min(members.len())]);
    }
    picked.sort_unstable();
    Ok(picked)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy and its gradient w.r.t. the logits.
fn bce(logits: &Array2<f64>, y: &Array2<f64>) -> (f64, Array2<f64>) {
    let n = logits.len() as f64;
    let p = logits.mapv(sigmoid);
    let loss = ndarray::Zip::from(logits)
        .and(y)
        .fold(0.0, |acc, &z, &t| acc + z.max(0.0) - z * t + (-z.abs()).exp().ln_1p());
    (loss / n, (&p - y) / n)
}

fn standardize(x: &Array2<f64>, mean: &Array1<f64>, std: &Array1<f64>) -> Array2<f64> {
    (x - mean) / std
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeData<'a> {
    pub images: &'a [ImageTensor],
    pub categories: &'a [Vec<String>],
}

/// Train a logistic-regression head on frozen features of a `portion`
/// subsample of `train`, early-stopped on one half of `held_out`, and report
/// on the other half.
pub fn linear_probe(
    model: &DualEncoder,
    train: ProbeData<'_>,
    held_out: ProbeData<'_>,
    classes: &[String],
    portion: f64,
    config: &ProbeConfig,
) -> Result<EvalReport> {
    if classes.is_empty() {
        return Err(Error::Config("probe needs at least one class".into()));
    }
    let strata: Vec<String> = train
        .categories
        .iter()
        .map(|c| c.first().cloned().unwrap_or_default())
        .collect();
    let subset = stratified_subsample(&strata, portion, config.seed)?;
    let sub_images: Vec<ImageTensor> = subset.iter().map(|&i| train.images[i].clone()).collect();
    let sub_cats: Vec<Vec<String>> = subset.iter().map(|&i| train.categories[i].clone()).collect();
    let x_train = model.image_features(&sub_images)?;
    let y_train = gold_matrix(&sub_cats, classes).mapv(|b| if b { 1.0 } else { 0.0 });

    let mut split: Vec<usize> = (0..held_out.images.len()).collect();
    split.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1)));
    let (val_idx, test_idx) = split.split_at(split.len() / 2);
    if val_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::Config("held-out set too small to split".into()));
    }
    let pick = |idx: &[usize]| -> (Vec<ImageTensor>, Vec<Vec<String>>) {
        (
            idx.iter().map(|&i| held_out.images[i].clone()).collect(),
            idx.iter().map(|&i| held_out.categories[i].clone()).collect(),
        )
    };
    let (val_images, val_cats) = pick(val_idx);
    let (test_images, test_cats) = pick(test_idx);

    let mean = x_train.mean_axis(Axis(0)).expect("non-empty subsample");
    let std = x_train.std_axis(Axis(0), 0.0).mapv(|s| s.max(1e-8));
    let x_train = standardize(&x_train, &mean, &std);
    let x_val = standardize(&model.image_features(&val_images)?, &mean, &std);
    let x_test = standardize(&model.image_features(&test_images)?, &mean, &std);
    let y_val = gold_matrix(&val_cats, classes).mapv(|b| if b { 1.0 } else { 0.0 });

    let d = x_train.ncols();
    let mut w = Array2::<f64>::zeros((d, classes.len()));
    let mut b = Array1::<f64>::zeros(classes.len());
    let mut best = (f64::INFINITY, w.clone(), b.clone(), 0usize);
    let mut epochs_run = 0;
    for epoch in 0..config.max_epochs {
        let (_, dz) = bce(&(x_train.dot(&w) + &b), &y_train);
        w.scaled_add(-config.lr, &x_train.t().dot(&dz));
        b.scaled_add(-config.lr, &dz.sum_axis(Axis(0)));
        epochs_run = epoch + 1;
        let (val_loss, _) = bce(&(x_val.dot(&w) + &b), &y_val);
        if !val_loss.is_finite() {
            return Err(Error::NonFinite("probe validation loss"));
        }
        if val_loss < best.0 {
            best = (val_loss, w.clone(), b.clone(), epoch);
        } else if epoch - best.3 >= config.patience {
            break;
        }
    }
    let (val_loss, w, b, _) = best;
    let scores = x_test.dot(&w) + &b;
    let gold = gold_matrix(&test_cats, classes);
    let mut report = macro_metrics(&scores, &gold, classes)?;
    report.extras.insert("train_images".into(), subset.len() as f64);
    report.extras.insert("epochs_run".into(), epochs_run as f64);
    report.extras.insert("val_loss".into(), val_loss);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_percent_of_two_thousand() {
        let strata: Vec<String> = (0..2000).map(|i| format!("c{}", i % 8)).collect();
        let s = stratified_subsample(&strata, 0.01, 3).unwrap();
        assert_eq!(s.len(), 20);
        for c in 0..8 {
            assert!(s.iter().any(|&i| i % 8 == c));
        }
        assert_eq!(s, stratified_subsample(&strata, 0.01, 3).unwrap());
    }

    #[test]
    fn starved_stratum_is_an_error() {
        let mut strata: Vec<String> = (0..199).map(|_| "big".to_string()).collect();
        strata.push("rare".into());
        assert!(matches!(stratified_subsample(&strata, 0.01, 0), Err(Error::Stratification(_))));
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        let z = ndarray::array![[0.3, -2.0], [1.5, 0.1]];
        let y = ndarray::array![[1.0, 0.0], [0.0, 1.0]];
        let (_, g) = bce(&z, &y);
        let h = 1e-6;
        for idx in [(0, 0), (1, 1)] {
            let mut zp = z.clone();
            zp[idx] += h;
            let mut zm = z.clone();
            zm[idx] -= h;
            let fd = (bce(&zp, &y).0 - bce(&zm, &y).0) / (2.0 * h);
            assert!((fd - g[idx]).abs() < 1e-8);
        }
    }
}
