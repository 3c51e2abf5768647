//! Feed-forward network with ReLU hidden layers and a sigmoid or softmax
//! head, trained by mini-batch SGD with momentum.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::train::{fnv1a_64, sigmoid, softplus};

#[derive(Debug, Error, PartialEq)]
pub enum MlpError {
    #[error("network needs at least an input and an output layer, all non-empty; got {0:?}")]
    BadShape(Vec<usize>),
    #[error("input has length {found}, network expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("label {label} out of range for {classes} classes")]
    BadLabel { label: usize, classes: usize },
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error("loss diverged at epoch {epoch}")]
    Diverged { epoch: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    /// One output unit with a sigmoid; labels are 0 or 1.
    Binary,
    /// One unit per class with a softmax.
    Softmax,
}

/// One training or evaluation example.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    /// Per layer, `out × in` row-major.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Gradients with the same layout as the network parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(mlp: &Mlp) -> Self {
        Gradients {
            weights: mlp.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: mlp.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().chain(self.biases.iter_mut()).for_each(|v| v.fill(0.0));
    }
}

fn check_shape(sizes: &[usize]) -> Result<(), MlpError> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(MlpError::BadShape(sizes.to_vec()));
    }
    Ok(())
}

impl Mlp {
    /// He-uniform weights from `seed`, zero biases.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self, MlpError> {
        check_shape(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        for pair in sizes.windows(2) {
            let bound = (6.0 / pair[0] as f64).sqrt();
            weights.push((0..pair[0] * pair[1]).map(|_| rng.random_range(-bound..bound)).collect());
        }
        let biases = sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(Mlp { sizes: sizes.to_vec(), weights, biases })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self, MlpError> {
        check_shape(sizes)?;
        let weights = sizes.windows(2).map(|p| vec![0.0; p[0] * p[1]]).collect();
        let biases = sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(Mlp { sizes: sizes.to_vec(), weights, biases })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn head(&self) -> Head {
        if *self.sizes.last().unwrap() == 1 {
            Head::Binary
        } else {
            Head::Softmax
        }
    }

    pub fn classes(&self) -> usize {
        match self.head() {
            Head::Binary => 2,
            Head::Softmax => *self.sizes.last().unwrap(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// FNV-1a over the bit patterns of every parameter.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::with_capacity(self.parameter_count() * 8);
        for v in self.weights.iter().chain(&self.biases) {
            v.iter().for_each(|x| bytes.extend_from_slice(&x.to_bits().to_le_bytes()));
        }
        fnv1a_64(&bytes)
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(|v| v.iter().all(|x| x.is_finite()))
    }

    fn check_input(&self, x: &[f64]) -> Result<(), MlpError> {
        if x.len() != self.input_dim() {
            return Err(MlpError::DimensionMismatch { expected: self.input_dim(), found: x.len() });
        }
        Ok(())
    }

    fn check_label(&self, label: usize) -> Result<(), MlpError> {
        if label >= self.classes() {
            return Err(MlpError::BadLabel { label, classes: self.classes() });
        }
        Ok(())
    }

    /// Fills `acts[l]` with the output of layer `l` (`acts[0]` is the input);
    /// the last entry holds the logits.
    fn forward_into(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.resize(self.sizes.len(), Vec::new());
        acts[0].clear();
        acts[0].extend_from_slice(x);
        let last = self.weights.len() - 1;
        for l in 0..self.weights.len() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let (prev, rest) = acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut rest[0];
            out.clear();
            for o in 0..fan_out {
                let row = &self.weights[l][o * fan_in..(o + 1) * fan_in];
                let z = self.biases[l][o] + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
                out.push(if l < last { z.max(0.0) } else { z });
            }
        }
    }

    /// Output probabilities: one value in (0, 1) for the binary head, a
    /// probability vector for the softmax head.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, MlpError> {
        self.check_input(x)?;
        let mut acts = Vec::new();
        self.forward_into(x, &mut acts);
        let logits = acts.pop().unwrap();
        Ok(match self.head() {
            Head::Binary => vec![sigmoid(logits[0])],
            Head::Softmax => softmax(&logits),
        })
    }

    /// Class 1 when the positive probability is at least 0.5 for binary
    /// heads, the arg-max class otherwise.
    pub fn predict_class(&self, x: &[f64]) -> Result<usize, MlpError> {
        let p = self.forward(x)?;
        Ok(match self.head() {
            Head::Binary => usize::from(p[0] >= 0.5),
            Head::Softmax => argmax(&p),
        })
    }

    /// Cross-entropy of one example.
    pub fn loss(&self, x: &[f64], label: usize) -> Result<f64, MlpError> {
        self.check_input(x)?;
        self.check_label(label)?;
        let mut acts = Vec::new();
        self.forward_into(x, &mut acts);
        Ok(self.loss_and_delta(acts.last().unwrap(), label).0)
    }

    fn loss_and_delta(&self, logits: &[f64], label: usize) -> (f64, Vec<f64>) {
        match self.head() {
            Head::Binary => {
                let z = logits[0];
                let y = label as f64;
                (softplus(z) - y * z, vec![sigmoid(z) - y])
            }
            Head::Softmax => {
                let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = logits.iter().map(|z| (z - m).exp()).sum();
                let loss = sum.ln() + m - logits[label];
                let mut d: Vec<f64> = logits.iter().map(|z| (z - m).exp() / sum).collect();
                d[label] -= 1.0;
                (loss, d)
            }
        }
    }

    /// Exact gradient of the cross-entropy of one example.
    pub fn backward(&self, x: &[f64], label: usize) -> Result<(f64, Gradients), MlpError> {
        self.check_input(x)?;
        self.check_label(label)?;
        let mut grads = Gradients::zeros_like(self);
        let mut scratch = Scratch::default();
        let loss = self.accumulate(x, label, 1.0, &mut grads, &mut scratch);
        Ok((loss, grads))
    }

    /// Adds `weight ·` the example's gradient into `grads`; returns its loss.
    fn accumulate(&self, x: &[f64], label: usize, weight: f64, grads: &mut Gradients, s: &mut Scratch) -> f64 {
        self.forward_into(x, &mut s.acts);
        let (loss, mut delta) = self.loss_and_delta(s.acts.last().unwrap(), label);
        delta.iter_mut().for_each(|d| *d *= weight);
        for l in (0..self.weights.len()).rev() {
            let fan_in = self.sizes[l];
            let input = &s.acts[l];
            for (o, &d) in delta.iter().enumerate() {
                grads.biases[l][o] += d;
                if d != 0.0 {
                    let g = &mut grads.weights[l][o * fan_in..(o + 1) * fan_in];
                    g.iter_mut().zip(input).for_each(|(g, a)| *g += d * a);
                }
            }
            if l == 0 {
                break;
            }
            s.prev.clear();
            s.prev.resize(fan_in, 0.0);
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    let row = &self.weights[l][o * fan_in..(o + 1) * fan_in];
                    s.prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
                }
            }
            // ReLU derivative: zero where the unit was inactive
            for (p, a) in s.prev.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            std::mem::swap(&mut delta, &mut s.prev);
        }
        loss
    }
}

#[derive(Default)]
struct Scratch {
    acts: Vec<Vec<f64>>,
    prev: Vec<f64>,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|v| v / sum).collect()
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
}

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MlpHyper {
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for MlpHyper {
    fn default() -> Self {
        MlpHyper { hidden: vec![400, 200], batch_size: 128, learning_rate: 0.01, momentum: 0.9, max_epochs: 100, patience: 5 }
    }
}

impl MlpHyper {
    /// Layer sizes for the given input width and class count.
    pub fn layer_sizes(&self, input: usize, classes: usize) -> Vec<usize> {
        let out = if classes == 2 { 1 } else { classes };
        std::iter::once(input).chain(self.hidden.iter().copied()).chain(std::iter::once(out)).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrainingLog {
    pub train_losses: Vec<f64>,
    pub validation_losses: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// `N / (K · n_c)` for each class present, zero for absent classes.
pub fn inverse_frequency_weights(labels: impl IntoIterator<Item = usize>, classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; classes];
    let mut n = 0usize;
    for l in labels {
        counts[l] += 1;
        n += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count().max(1);
    counts.iter().map(|&c| if c == 0 { 0.0 } else { n as f64 / (present * c) as f64 }).collect()
}

/// Weighted mean cross-entropy, `Σ w·loss / Σ w`.
pub fn mean_loss(mlp: &Mlp, samples: &[Sample], class_weights: Option<&[f64]>) -> Result<f64, MlpError> {
    let (mut num, mut den) = (0.0, 0.0);
    for s in samples {
        let w = class_weights.map_or(1.0, |cw| cw[s.label]);
        num += w * mlp.loss(&s.x, s.label)?;
        den += w;
    }
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

/// Mini-batch SGD with momentum and early stopping on validation loss.
/// The parameters of the best validation epoch are returned.
pub fn train_mlp(
    mut mlp: Mlp,
    train: &[Sample],
    validation: &[Sample],
    hyper: &MlpHyper,
    class_weights: Option<&[f64]>,
    seed: u64,
) -> Result<(Mlp, TrainingLog), MlpError> {
    if train.is_empty() {
        return Err(MlpError::EmptySet("training"));
    }
    if validation.is_empty() {
        return Err(MlpError::EmptySet("validation"));
    }
    for s in train.iter().chain(validation) {
        mlp.check_input(&s.x)?;
        mlp.check_label(s.label)?;
    }
    let weight_of = |label: usize| class_weights.map_or(1.0, |cw| cw[label]);
    let mut velocity = Gradients::zeros_like(&mlp);
    let mut grads = Gradients::zeros_like(&mlp);
    let mut scratch = Scratch::default();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = TrainingLog::default();
    let mut best = (f64::INFINITY, mlp.clone());
    let mut stale = 0usize;
    let batch_size = hyper.batch_size.max(1);

    for epoch in 1..=hyper.max_epochs {
        order.shuffle(&mut rng);
        let (mut epoch_num, mut epoch_den) = (0.0, 0.0);
        for batch in order.chunks(batch_size) {
            grads.clear();
            let mut batch_weight = 0.0;
            for &i in batch {
                let s = &train[i];
                let w = weight_of(s.label);
                epoch_num += w * mlp.accumulate(&s.x, s.label, w, &mut grads, &mut scratch);
                batch_weight += w;
            }
            epoch_den += batch_weight;
            if batch_weight == 0.0 {
                continue;
            }
            let scale = hyper.learning_rate / batch_weight;
            let params = mlp.weights.iter_mut().chain(mlp.biases.iter_mut());
            let vel = velocity.weights.iter_mut().chain(velocity.biases.iter_mut());
            let grad = grads.weights.iter().chain(grads.biases.iter());
            for ((p, v), g) in params.zip(vel).zip(grad) {
                for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                    *v = hyper.momentum * *v - scale * g;
                    *p += *v;
                }
            }
        }
        let train_loss = epoch_num / epoch_den.max(f64::MIN_POSITIVE);
        let val_loss = mean_loss(&mlp, validation, class_weights)?;
        if !train_loss.is_finite() || !val_loss.is_finite() || !mlp.all_finite() {
            return Err(MlpError::Diverged { epoch });
        }
        log.train_losses.push(train_loss);
        log.validation_losses.push(val_loss);
        if val_loss < best.0 {
            best = (val_loss, mlp.clone());
            log.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale > hyper.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    Ok((best.1, log))
}
