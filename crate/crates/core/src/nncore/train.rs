use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Batch, Context, Dataset, Ideal, Mlp, NnError, Sgd, TrainConfig, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Accuracy per true class; classes absent from the dataset report 0.
    pub per_class: Vec<f64>,
    pub class_counts: Vec<usize>,
    pub mean_nll: f64,
    /// Batch losses, filled only by training.
    pub loss_curve: Vec<f64>,
}

impl Metrics {
    fn from_counts(correct: &[usize; NUM_CLASSES], counts: &[usize; NUM_CLASSES], nll: f64) -> Self {
        let total: usize = counts.iter().sum();
        let hits: usize = correct.iter().sum();
        Self {
            accuracy: hits as f64 / total as f64,
            per_class: correct
                .iter()
                .zip(counts)
                .map(|(&c, &n)| if n == 0 { 0.0 } else { c as f64 / n as f64 })
                .collect(),
            class_counts: counts.to_vec(),
            mean_nll: nll / total as f64,
            loss_curve: Vec::new(),
        }
    }

    pub fn min_class_accuracy(&self) -> f64 {
        self.per_class
            .iter()
            .zip(&self.class_counts)
            .filter(|(_, &n)| n > 0)
            .map(|(a, _)| *a)
            .fold(f64::INFINITY, f64::min)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Classifies every image in order, calling `ctx.advance()` after each.
pub fn evaluate(mlp: &Mlp, dataset: &Dataset, ctx: &mut impl Context) -> Result<Metrics, NnError> {
    if dataset.is_empty() {
        return Err(NnError::Empty("dataset"));
    }
    if dataset.dim() != mlp.input_dim() {
        return Err(NnError::Dimension {
            expected: mlp.input_dim(),
            actual: dataset.dim(),
        });
    }
    let mut correct = [0usize; NUM_CLASSES];
    let mut counts = [0usize; NUM_CLASSES];
    let mut nll = 0.0;
    let mut x = vec![0.0; dataset.dim()];
    for i in 0..dataset.len() {
        dataset.image_into(i, &mut x);
        let out = mlp.forward(&x, ctx)?;
        let label = dataset.label(i) as usize;
        counts[label] += 1;
        nll -= out[label];
        if argmax(&out) == label {
            correct[label] += 1;
        }
        ctx.advance();
    }
    Ok(Metrics::from_counts(&correct, &counts, nll))
}

/// Ideal-context evaluation, parallel over images. Per-image results are
/// collected in dataset order and reduced sequentially, so the metrics do not
/// depend on the thread schedule.
pub fn evaluate_par(mlp: &Mlp, dataset: &Dataset) -> Result<Metrics, NnError> {
    if dataset.is_empty() {
        return Err(NnError::Empty("dataset"));
    }
    if dataset.dim() != mlp.input_dim() {
        return Err(NnError::Dimension {
            expected: mlp.input_dim(),
            actual: dataset.dim(),
        });
    }
    let results: Vec<(usize, bool, f64)> = (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            let out = mlp.forward(&dataset.image(i), &mut Ideal)?;
            let label = dataset.label(i) as usize;
            Ok((label, argmax(&out) == label, out[label]))
        })
        .collect::<Result<_, NnError>>()?;
    let mut correct = [0usize; NUM_CLASSES];
    let mut counts = [0usize; NUM_CLASSES];
    let mut nll = 0.0;
    for (label, hit, lp) in results {
        counts[label] += 1;
        correct[label] += usize::from(hit);
        nll -= lp;
    }
    Ok(Metrics::from_counts(&correct, &counts, nll))
}

/// One pass over `dataset` in mini-batches of `cfg.batch_size`; the last
/// batch may be short. Returns the loss of every batch.
pub fn train_epoch(
    mlp: &mut Mlp,
    dataset: &Dataset,
    cfg: &TrainConfig,
    epoch: usize,
    opt: &mut Sgd,
    ctx: &mut impl Context,
) -> Result<Vec<f64>, NnError> {
    let per_epoch = cfg.updates_per_epoch(dataset.len());
    let total = per_epoch * cfg.epochs.max(epoch + 1);
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(NnError::Empty("dataset"));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    if cfg.shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1 + epoch as u64);
        order.shuffle(&mut rng);
    }
    let mut batch = Batch::new(dataset.dim());
    let mut losses = Vec::with_capacity(order.len().div_ceil(cfg.batch_size));
    ctx.refresh();
    for (update, chunk) in order.chunks(cfg.batch_size).enumerate() {
        dataset.fill_batch(chunk, &mut batch);
        let global = epoch * per_epoch + update;
        let lr = cfg.learning_rate_at(global, total);
        losses.push(opt.step(mlp, &batch, ctx, lr, global)?);
    }
    Ok(losses)
}

/// Builds a network seeded from `cfg.seed` and trains it for `cfg.epochs`.
pub fn train(
    dims: &[usize],
    dataset: &Dataset,
    cfg: &TrainConfig,
    ctx: &mut impl Context,
) -> Result<(Mlp, Vec<f64>), NnError> {
    cfg.validate()?;
    let mut mlp = Mlp::new(dims, cfg.seed)?;
    ctx.after_update(&mut mlp);
    let mut opt = Sgd::new(&mlp, cfg.momentum);
    let mut curve = Vec::new();
    for epoch in 0..cfg.epochs {
        curve.extend(train_epoch(&mut mlp, dataset, cfg, epoch, &mut opt, ctx)?);
    }
    Ok((mlp, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::Split;

    fn toy(n: usize, seed: u64) -> Dataset {
        // Two separable blobs on 4 binary pixels.
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = (i as u64 * 7 + seed) % 2;
            let img = if c == 0 {
                vec![1.0, 1.0, 0.0, (i % 3 == 0) as u8 as f64]
            } else {
                vec![0.0, (i % 4 == 0) as u8 as f64, 1.0, 1.0]
            };
            images.push(img);
            labels.push(c as u8);
        }
        Dataset::from_images(&images, labels, Split::Train).unwrap()
    }

    #[test]
    fn perfect_classifier() {
        let ds = toy(40, 1);
        let cfg = TrainConfig {
            batch_size: 4,
            epochs: 20,
            learning_rate: 0.5,
            final_lr_fraction: 1.0,
            momentum: 0.0,
            seed: 3,
            shuffle: true,
        };
        let (mlp, curve) = train(&[4, 8, 10], &ds, &cfg, &mut Ideal).unwrap();
        assert_eq!(curve.len(), 200);
        let m = evaluate(&mlp, &ds, &mut Ideal).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.per_class[0], 1.0);
        assert_eq!(evaluate_par(&mlp, &ds).unwrap(), m);
    }

    #[test]
    fn deterministic_training() {
        let ds = toy(50, 2);
        let cfg = TrainConfig {
            batch_size: 8,
            ..TrainConfig::default()
        };
        let a = train(&[4, 5, 10], &ds, &cfg, &mut Ideal).unwrap();
        let b = train(&[4, 5, 10], &ds, &cfg, &mut Ideal).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn per_class_weights_to_overall() {
        let ds = toy(30, 0);
        let mlp = Mlp::new(&[4, 3, 10], 11).unwrap();
        let m = evaluate(&mlp, &ds, &mut Ideal).unwrap();
        let weighted: f64 = m
            .per_class
            .iter()
            .zip(&m.class_counts)
            .map(|(a, &n)| a * n as f64)
            .sum::<f64>()
            / ds.len() as f64;
        assert!((weighted - m.accuracy).abs() < 1e-12);
    }

    #[test]
    fn permutation_invariant() {
        let ds = toy(30, 0);
        let mlp = Mlp::new(&[4, 3, 10], 4).unwrap();
        let rev: Vec<usize> = (0..ds.len()).rev().collect();
        let a = evaluate(&mlp, &ds, &mut Ideal).unwrap();
        let b = evaluate(&mlp, &ds.select(&rev), &mut Ideal).unwrap();
        assert_eq!(a.accuracy, b.accuracy);
        assert_eq!(a.per_class, b.per_class);
    }

    #[test]
    fn bad_config() {
        let ds = toy(4, 0);
        let cfg = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(train(&[4, 2, 10], &ds, &cfg, &mut Ideal).is_err());
        let cfg = TrainConfig {
            learning_rate: -1.0,
            ..TrainConfig::default()
        };
        assert!(train(&[4, 2, 10], &ds, &cfg, &mut Ideal).is_err());
    }
}
