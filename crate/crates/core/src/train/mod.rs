//! Embedding trainers: CBOW, skip-gram, GloVe and a fastText variant that
//! gives concept tokens no character n-grams.

mod config;
mod fasttext;
mod glove;
mod sgns;
mod shared;
mod word2vec;

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::embedding::{Embedding, EmbeddingError};
use crate::vocab::Vocabulary;

pub use config::{ConfigError, FastTextConfig, FullConfig, GloveConfig, ModelKind, TrainingConfig};
pub use fasttext::{char_ngrams, fnv1a_64, initial_fasttext_matrix, ngram_buckets, train_fasttext_variant, SubwordIndex};
pub use glove::{
    build_cooccurrence, glove_pair_gradient, glove_pair_update, glove_weight, train_glove, train_glove_on_corpus, CoocEntry,
    CoocMatrix, GloveParams,
};
pub use sgns::{sgns_step, sgns_target, sigmoid, softplus};
pub use word2vec::{train_cbow, train_skipgram};

/// Number of center tokens per running-loss sample.
pub const LOSS_REPORT_INTERVAL: u64 = 10_000;

/// The learning rate never falls below `learning_rate * LR_FLOOR`.
pub const LR_FLOOR: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("corpus has {0} in-vocabulary tokens; at least 2 are required")]
    CorpusTooShort(usize),
    #[error("co-occurrence matrix is empty")]
    EmptyCooccurrence,
    #[error("non-finite weights after epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("configured model is {configured:?}, trainer expects {expected:?}")]
    WrongModel { configured: ModelKind, expected: ModelKind },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Loss trace of a training run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrainReport {
    /// Mean loss per scored example, one value per epoch. For GloVe this is
    /// the full weighted objective evaluated after the epoch.
    pub epoch_losses: Vec<f64>,
    /// `(center tokens processed, mean loss over the interval)`.
    pub running_losses: Vec<(u64, f64)>,
    /// Smallest learning rate applied.
    pub min_learning_rate: f64,
}

/// Subword state of the fastText variant.
#[derive(Clone, Debug, PartialEq)]
pub struct SubwordVectors {
    pub bucket_count: usize,
    /// `bucket_count × dim`
    pub vectors: Vec<f32>,
    /// Bucket ids per vocabulary entry; empty for concept tokens.
    pub index: SubwordIndex,
}

/// Trained parameters. Rows follow vocabulary order.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    pub model: ModelKind,
    pub dim: usize,
    pub rows: usize,
    /// `rows × dim`; GloVe main vectors `w`.
    pub input_vectors: Vec<f32>,
    /// `rows × dim`; GloVe context vectors `w̃`.
    pub output_vectors: Vec<f32>,
    pub subwords: Option<SubwordVectors>,
}

impl EmbeddingMatrix {
    pub fn input_row(&self, i: usize) -> &[f32] {
        &self.input_vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn output_row(&self, i: usize) -> &[f32] {
        &self.output_vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn subword_row(&self, bucket: usize) -> Option<&[f32]> {
        self.subwords.as_ref().map(|s| &s.vectors[bucket * self.dim..(bucket + 1) * self.dim])
    }

    /// The vector a token is looked up by: the input row, the mean of the
    /// input row and its n-gram buckets for fastText words, or `w + w̃` for
    /// GloVe.
    pub fn representation(&self, i: usize) -> Vec<f32> {
        match self.model {
            ModelKind::Glove => self.input_row(i).iter().zip(self.output_row(i)).map(|(a, b)| a + b).collect(),
            _ => {
                let row = self.input_row(i).to_vec();
                let Some(sub) = &self.subwords else { return row };
                let buckets = sub.index.buckets(i);
                if buckets.is_empty() {
                    return row;
                }
                let mut acc = row;
                for &b in buckets {
                    let r = &sub.vectors[b as usize * self.dim..(b as usize + 1) * self.dim];
                    acc.iter_mut().zip(r).for_each(|(a, v)| *a += v);
                }
                let n = (buckets.len() + 1) as f32;
                acc.iter_mut().for_each(|a| *a /= n);
                acc
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.input_vectors.iter().chain(&self.output_vectors).all(|v| v.is_finite())
            && self.subwords.as_ref().is_none_or(|s| s.vectors.iter().all(|v| v.is_finite()))
    }
}

/// Builds an [`Embedding`] from the token representations. With
/// `concept_only` only concept tokens are kept.
pub fn export(matrix: &EmbeddingMatrix, vocab: &Vocabulary, concept_only: bool) -> Result<Embedding, TrainError> {
    let mut tokens = Vec::new();
    let mut vectors = Vec::new();
    for i in 0..vocab.len() {
        if concept_only && !vocab.is_concept(i) {
            continue;
        }
        tokens.push(vocab.token(i).to_string());
        vectors.extend(matrix.representation(i));
    }
    Ok(Embedding::new(tokens, vectors, matrix.dim)?)
}

/// Trains whichever model `config.model` names.
pub fn train<T: AsRef<str>>(
    corpus: &[Vec<T>],
    vocab: &Vocabulary,
    config: &TrainingConfig,
    fasttext: &FastTextConfig,
    glove: &GloveConfig,
) -> Result<(EmbeddingMatrix, TrainReport), TrainError> {
    match config.model {
        ModelKind::Cbow => train_cbow(corpus, vocab, config),
        ModelKind::SkipGram => train_skipgram(corpus, vocab, config),
        ModelKind::FastTextVariant => train_fasttext_variant(corpus, vocab, config, fasttext),
        ModelKind::Glove => train_glove_on_corpus(corpus, vocab, config, glove),
    }
}

pub(crate) fn encode_corpus<T: AsRef<str>>(corpus: &[Vec<T>], vocab: &Vocabulary) -> Result<Vec<Vec<u32>>, TrainError> {
    let docs: Vec<Vec<u32>> = corpus.iter().map(|d| vocab.encode(d)).filter(|d| !d.is_empty()).collect();
    let n: usize = docs.iter().map(Vec::len).sum();
    if n < 2 {
        return Err(TrainError::CorpusTooShort(n));
    }
    Ok(docs)
}

/// Independent stream for `(seed, worker, epoch)`.
pub(crate) fn stream_rng(seed: u64, worker: usize, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 16) | worker as u64 | (1 << 40));
    rng
}

/// Uniform `[-scale, scale)` initialization from the seed.
pub(crate) fn uniform_init(len: usize, scale: f32, seed: u64, stream: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..len).map(|_| (rng.random::<f32>() * 2.0 - 1.0) * scale).collect()
}

/// Splits `n` documents into `workers` contiguous ranges.
pub(crate) fn partition(n: usize, workers: usize) -> Vec<std::ops::Range<usize>> {
    let workers = workers.clamp(1, n.max(1));
    (0..workers).map(|w| (n * w / workers)..(n * (w + 1) / workers)).collect()
}

/// Linearly decayed learning rate shared by the window-based trainers.
pub(crate) struct LearningRate {
    initial: f64,
    total_work: u64,
    processed: AtomicU64,
}

impl LearningRate {
    pub fn new(initial: f64, total_work: u64) -> Self {
        LearningRate { initial, total_work: total_work.max(1), processed: AtomicU64::new(0) }
    }

    /// Records `tokens` processed and returns the new rate.
    pub fn advance(&self, tokens: u64) -> f64 {
        let done = self.processed.fetch_add(tokens, Ordering::Relaxed) + tokens;
        self.at(done)
    }

    pub fn current(&self) -> f64 {
        self.at(self.processed.load(Ordering::Relaxed))
    }

    pub fn processed(&self) -> u64 {
        self.processed.load(Ordering::Relaxed)
    }

    fn at(&self, done: u64) -> f64 {
        let frac = 1.0 - done as f64 / (self.total_work as f64 + 1.0);
        self.initial * frac.max(LR_FLOOR)
    }
}

/// Per-worker loss bookkeeping.
#[derive(Default)]
pub(crate) struct LossMeter {
    pub epoch_sum: f64,
    pub epoch_examples: u64,
    interval_sum: f64,
    interval_examples: u64,
    interval_centers: u64,
    pub samples: Vec<(u64, f64)>,
}

impl LossMeter {
    pub fn record(&mut self, loss: f64, examples: u64) {
        self.epoch_sum += loss;
        self.epoch_examples += examples;
        self.interval_sum += loss;
        self.interval_examples += examples;
    }

    pub fn center_done(&mut self, processed_total: u64) {
        self.interval_centers += 1;
        if self.interval_centers == LOSS_REPORT_INTERVAL {
            if self.interval_examples > 0 {
                self.samples.push((processed_total, self.interval_sum / self.interval_examples as f64));
            }
            self.interval_sum = 0.0;
            self.interval_examples = 0;
            self.interval_centers = 0;
        }
    }
}
