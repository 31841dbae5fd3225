use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Mode, Network, NetworkSpec};
use crate::error::{Error, Result};
use crate::tensor::{adam_step, softmax, softmax_cross_entropy, AdamConfig, AdamState, Tensor};
use crate::video::{resize_bilinear, subsample_indices, ClipArchive, SplitRatios};

/// Samples of one fixed shape stored back to back, with integer labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    sample_shape: Vec<usize>,
    data: Vec<f32>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(sample_shape: &[usize], data: Vec<f32>, labels: Vec<usize>) -> Result<Self> {
        let per: usize = sample_shape.iter().product();
        if per == 0 || data.len() != per * labels.len() {
            return Err(Error::Dimension(format!(
                "{} values cannot hold {} samples of {sample_shape:?}",
                data.len(),
                labels.len()
            )));
        }
        Ok(Dataset { sample_shape: sample_shape.to_vec(), data, labels })
    }

    /// Converts archive records into network samples for `spec`; see
    /// [`network_sample`].
    pub fn from_archive(archive: &ClipArchive, spec: &NetworkSpec) -> Result<Self> {
        let mut data = Vec::with_capacity(archive.len() * spec.sample_shape().iter().product::<usize>());
        for (i, r) in archive.records.iter().enumerate() {
            let s = network_sample(&r.frames, spec).map_err(|e| match e {
                Error::Dimension(m) => Error::Dimension(format!("record {i}: {m}")),
                other => other,
            })?;
            data.extend(s);
        }
        Dataset::new(&spec.sample_shape(), data, archive.record_labels())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.sample_shape
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        let per = self.data.len() / self.labels.len();
        &self.data[i * per..(i + 1) * per]
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut data = Vec::with_capacity(indices.len() * self.sample(0).len());
        for &i in indices {
            data.extend_from_slice(self.sample(i));
        }
        Dataset {
            sample_shape: self.sample_shape.clone(),
            data,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Stacks the samples at `indices` into one batch tensor.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor<f32>> {
        let mut data = Vec::with_capacity(indices.len() * self.sample(0).len());
        for &i in indices {
            data.extend_from_slice(self.sample(i));
        }
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(&self.sample_shape);
        Tensor::new(&shape, data)
    }

    pub fn class_counts(&self, num_classes: usize) -> Vec<usize> {
        let mut counts = vec![0; num_classes];
        for &l in &self.labels {
            if l < num_classes {
                counts[l] += 1;
            }
        }
        counts
    }
}

/// Turns a `T x C x H x W` record into one network sample: frames are
/// resized to the spec's height and width; 3-D specs resample time to
/// `spec.frames` and reorder to `C x T x H x W`, 2-D specs take a single
/// frame as `C x H x W`.
pub fn network_sample(frames: &Tensor<f32>, spec: &NetworkSpec) -> Result<Vec<f32>> {
    let s = frames.shape();
    if s.len() != 4 {
        return Err(Error::Dimension(format!("expected T x C x H x W frames, got {s:?}")));
    }
    let (t, c) = (s[0], s[1]);
    if c != spec.in_channels {
        return Err(Error::Dimension(format!("{c}-channel frames for a {}-channel network", spec.in_channels)));
    }
    let resized = resize_bilinear(frames, spec.height, spec.width)?;
    let hw = spec.height * spec.width;
    match spec.mode {
        Mode::TwoD => {
            if t != 1 {
                return Err(Error::Dimension(format!("2d networks take single images, got {t} frames")));
            }
            Ok(resized.into_data())
        }
        Mode::ThreeD => {
            let idx = subsample_indices(t, spec.frames);
            let src = resized.data();
            let mut out = Vec::with_capacity(c * spec.frames * hw);
            for ch in 0..c {
                for &ti in &idx {
                    let start = (ti * c + ch) * hw;
                    out.extend_from_slice(&src[start..start + hw]);
                }
            }
            Ok(out)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub split: SplitRatios,
    /// Stop once validation accuracy reaches this value.
    pub target_accuracy: Option<f64>,
    /// Random horizontal flips and a one-frame temporal shift per sample.
    pub augment: bool,
    /// Restore the parameters of the best validation epoch at the end.
    pub keep_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            batch_size: 64,
            epochs: 100,
            seed: 0,
            split: SplitRatios::P80,
            target_accuracy: None,
            augment: false,
            keep_best: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

/// CSV with one row per epoch and split: `epoch,split,loss,accuracy`.
pub fn metrics_csv(history: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,split,loss,accuracy\n");
    for m in history {
        let _ = writeln!(out, "{},train,{:.6},{:.6}", m.epoch, m.train_loss, m.train_accuracy);
        if let (Some(l), Some(a)) = (m.val_loss, m.val_accuracy) {
            let _ = writeln!(out, "{},val,{l:.6},{a:.6}", m.epoch);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub history: Vec<EpochMetrics>,
    pub optimizer: AdamState<f32>,
    /// Epoch whose parameters the network holds on return.
    pub final_epoch: usize,
    pub stopped_early: bool,
}

fn flip_horizontal(sample: &mut [f32], width: usize) {
    for row in sample.chunks_mut(width) {
        row.reverse();
    }
}

/// Shifts every channel's frame sequence by one step, repeating the edge frame.
fn shift_time(sample: &mut [f32], channels: usize, frames: usize, forward: bool) {
    let per = sample.len() / (channels * frames);
    for ch in sample.chunks_mut(frames * per) {
        if forward {
            ch.copy_within(0..(frames - 1) * per, per);
        } else {
            ch.copy_within(per.., 0);
        }
    }
}

fn augmented_batch(data: &Dataset, idx: &[usize], spec: &NetworkSpec, rng: &mut ChaCha8Rng) -> Result<Tensor<f32>> {
    let mut batch = data.batch(idx)?;
    let per = batch.len() / idx.len();
    for s in batch.data_mut().chunks_mut(per) {
        if rng.gen_bool(0.5) {
            flip_horizontal(s, spec.width);
        }
        if spec.mode == Mode::ThreeD && spec.frames > 1 {
            match rng.gen_range(0..3) {
                0 => shift_time(s, spec.in_channels, spec.frames, true),
                1 => shift_time(s, spec.in_channels, spec.frames, false),
                _ => {}
            }
        }
    }
    Ok(batch)
}

fn check_labels(data: &Dataset, classes: usize, what: &str) -> Result<()> {
    match data.labels().iter().find(|&&l| l >= classes) {
        Some(l) => Err(Error::Index(format!("{what} label {l} but the network has {classes} classes"))),
        None => Ok(()),
    }
}

fn divergence(net: &Network, epoch: usize, batch: usize, loss: f32) -> Error {
    let mut norms = net.layer_norms();
    norms.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let listed: Vec<String> = norms.iter().take(6).map(|(n, v)| format!("{n}={v:.3e}")).collect();
    Error::Diverged(format!("loss {loss} at epoch {epoch}, batch {batch}; largest parameter norms: {}", listed.join(", ")))
}

/// Mini-batch Adam on softmax cross-entropy. Each epoch reshuffles the
/// training set from the seeded generator; `on_epoch` sees every epoch's
/// metrics as soon as they are known.
pub fn train(
    net: &mut Network,
    train_set: &Dataset,
    val_set: Option<&Dataset>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainReport> {
    if train_set.is_empty() {
        return Err(Error::Empty("training set has no samples".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let spec = net.spec().clone();
    let want = spec.sample_shape();
    for (d, what) in std::iter::once((train_set, "training")).chain(val_set.map(|v| (v, "validation"))) {
        if d.sample_shape() != want.as_slice() {
            return Err(Error::Dimension(format!(
                "{what} samples are {:?} but the network takes {want:?}",
                d.sample_shape()
            )));
        }
        check_labels(d, spec.num_classes, what)?;
    }
    for (c, n) in train_set.class_counts(spec.num_classes).iter().enumerate() {
        if *n == 0 {
            log::warn!("class {c} has no training samples");
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = AdamState::new(config.adam);
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<(f64, f64, usize, Network)> = None;
    let mut stopped_early = false;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let x = if config.augment {
                augmented_batch(train_set, idx, &spec, &mut rng)?
            } else {
                train_set.batch(idx)?
            };
            let labels: Vec<usize> = idx.iter().map(|&i| train_set.labels()[i]).collect();
            let (logits, trace) = net.forward_trace(&x)?;
            let (loss, dlogits) = softmax_cross_entropy(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(divergence(net, epoch, b, loss));
            }
            loss_sum += loss as f64 * idx.len() as f64;
            correct += argmax_rows(&logits).iter().zip(&labels).filter(|(p, l)| p == l).count();
            net.zero_grads();
            net.backward(&trace, &dlogits)?;
            adam_step(&mut net.params_mut(), &mut opt)?;
        }
        let mut m = EpochMetrics {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            val_loss: None,
            val_accuracy: None,
        };
        if let Some(v) = val_set.filter(|v| !v.is_empty()) {
            let e = evaluate(net, v)?;
            m.val_loss = Some(e.loss);
            m.val_accuracy = Some(e.accuracy);
            if config.keep_best {
                let better = match &best {
                    None => true,
                    Some((acc, loss, _, _)) => e.accuracy > *acc || (e.accuracy == *acc && e.loss < *loss),
                };
                if better {
                    best = Some((e.accuracy, e.loss, epoch, net.clone()));
                }
            }
        }
        log::info!(
            "epoch {epoch}: train loss {:.4} acc {:.3}{}",
            m.train_loss,
            m.train_accuracy,
            match (m.val_loss, m.val_accuracy) {
                (Some(l), Some(a)) => format!(", val loss {l:.4} acc {a:.3}"),
                _ => String::new(),
            }
        );
        on_epoch(&m);
        let reached = matches!((config.target_accuracy, m.val_accuracy), (Some(t), Some(a)) if a >= t);
        history.push(m);
        if reached {
            stopped_early = epoch < config.epochs;
            break;
        }
    }
    let mut final_epoch = history.len();
    if let Some((_, _, epoch, snapshot)) = best {
        if epoch != final_epoch {
            *net = snapshot;
            final_epoch = epoch;
        }
    }
    Ok(TrainReport { history, optimizer: opt, final_epoch, stopped_early })
}

pub(crate) fn argmax_rows(logits: &Tensor<f32>) -> Vec<usize> {
    let k = logits.shape()[1];
    logits
        .data()
        .chunks(k)
        .map(|row| {
            // First maximum wins.
            row.iter().enumerate().fold((0, f32::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc }).0
        })
        .collect()
}

/// Accuracy, mean loss and confusion matrix (rows are true classes).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<usize>,
}

impl Evaluation {
    /// Scores hard predictions; `loss` is left at zero.
    pub fn from_predictions(predictions: &[usize], labels: &[usize], num_classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("nothing to evaluate".into()));
        }
        if predictions.len() != labels.len() {
            return Err(Error::Dimension(format!("{} predictions for {} labels", predictions.len(), labels.len())));
        }
        let mut confusion = vec![vec![0; num_classes]; num_classes];
        let mut correct = 0;
        for (&p, &l) in predictions.iter().zip(labels) {
            if p >= num_classes || l >= num_classes {
                return Err(Error::Index(format!("class {} outside [0, {num_classes})", p.max(l))));
            }
            confusion[l][p] += 1;
            correct += usize::from(p == l);
        }
        Ok(Evaluation {
            accuracy: correct as f64 / labels.len() as f64,
            loss: 0.0,
            confusion,
            predictions: predictions.to_vec(),
        })
    }
}

const EVAL_BATCH: usize = 64;

/// Class probabilities for every sample, in batches.
pub fn predict(net: &Network, data: &Dataset) -> Result<Vec<Vec<f32>>> {
    let mut out = Vec::with_capacity(data.len());
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(EVAL_BATCH) {
        let p = softmax(&net.forward(&data.batch(chunk)?)?)?;
        out.extend(p.data().chunks(net.spec().num_classes).map(<[f32]>::to_vec));
    }
    Ok(out)
}

pub fn evaluate(net: &Network, data: &Dataset) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation set has no samples".into()));
    }
    let k = net.spec().num_classes;
    check_labels(data, k, "evaluation")?;
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut preds = Vec::with_capacity(data.len());
    let mut loss_sum = 0.0f64;
    for chunk in idx.chunks(EVAL_BATCH) {
        let logits = net.forward(&data.batch(chunk)?)?;
        let labels: Vec<usize> = chunk.iter().map(|&i| data.labels()[i]).collect();
        loss_sum += softmax_cross_entropy(&logits, &labels)?.0 as f64 * chunk.len() as f64;
        preds.extend(argmax_rows(&logits));
    }
    let mut e = Evaluation::from_predictions(&preds, data.labels(), k)?;
    e.loss = loss_sum / data.len() as f64;
    Ok(e)
}
