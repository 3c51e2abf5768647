//! Window-based trainers (CBOW and skip-gram) and the epoch driver they
//! share with the fastText variant.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::shared::SharedMatrix;
use super::sgns::sgns_target;
use super::{
    encode_corpus, partition, stream_rng, uniform_init, EmbeddingMatrix, LearningRate, LossMeter, ModelKind,
    TrainError, TrainReport, TrainingConfig,
};
use crate::vocab::{NegativeTable, Vocabulary, DEFAULT_TABLE_SIZE};

/// Tokens between learning-rate refreshes.
const LR_REFRESH: u64 = 1_000;
/// Redraws allowed when a negative collides with the center or context.
const MAX_REDRAWS: usize = 16;

pub(crate) struct WorkerCtx<'a> {
    pub rng: ChaCha8Rng,
    pub lr: f32,
    pub meter: LossMeter,
    pub window: usize,
    negatives: usize,
    table: &'a NegativeTable,
    schedule: &'a LearningRate,
    pending: u64,
    pub min_lr: f64,
}

impl WorkerCtx<'_> {
    /// Fills `out` with negatives that differ from `a` and `b`.
    pub fn draw_negatives(&mut self, a: u32, b: u32, out: &mut Vec<u32>) {
        out.clear();
        for _ in 0..self.negatives {
            for _ in 0..MAX_REDRAWS {
                let n = self.table.sample(&mut self.rng);
                if n != a && n != b {
                    out.push(n);
                    break;
                }
            }
        }
    }

    /// Effective radius for one position, uniform in `1..=window`.
    pub fn radius(&mut self) -> usize {
        self.rng.random_range(1..=self.window)
    }

    fn add_work(&mut self, tokens: u64) {
        self.pending += tokens;
        if self.pending >= LR_REFRESH {
            let lr = self.schedule.advance(self.pending);
            self.pending = 0;
            self.lr = lr as f32;
            self.min_lr = self.min_lr.min(lr);
        }
    }

    /// Called once per retained center token.
    pub fn center_done(&mut self) {
        self.add_work(1);
        let seen = self.schedule.processed() + self.pending;
        self.meter.center_done(seen);
    }

    fn flush(&mut self) {
        if self.pending > 0 {
            let lr = self.schedule.advance(self.pending);
            self.pending = 0;
            self.lr = lr as f32;
        }
    }
}

/// Per-document update rule of a window-based model.
pub(crate) trait WindowKernel: Sync {
    fn train_doc(&self, doc: &[u32], ctx: &mut WorkerCtx<'_>);
    fn all_finite(&self) -> bool;
}

/// Runs `config.epochs` passes of `kernel` over the documents with
/// subsampling, linear rate decay and `config.workers` hogwild workers.
pub(crate) fn drive<K: WindowKernel>(
    docs: &[Vec<u32>],
    vocab: &Vocabulary,
    config: &TrainingConfig,
    kernel: &K,
) -> Result<TrainReport, TrainError> {
    let keep: Vec<f64> = vocab.keep_probabilities(config.subsample_threshold);
    let table = NegativeTable::new(vocab, DEFAULT_TABLE_SIZE.min(vocab.len().max(1) * 10_000).max(vocab.len()));
    let total: u64 = docs.iter().map(|d| d.len() as u64).sum();
    let schedule = LearningRate::new(config.learning_rate, total * config.epochs as u64);
    let ranges = partition(docs.len(), config.workers);
    let mut report = TrainReport { min_learning_rate: config.learning_rate, ..Default::default() };

    for epoch in 0..config.epochs {
        let run_worker = |w: usize| {
            let mut ctx = WorkerCtx {
                rng: stream_rng(config.seed, w, epoch),
                lr: schedule.current() as f32,
                meter: LossMeter::default(),
                window: config.window,
                negatives: config.negatives,
                table: &table,
                schedule: &schedule,
                pending: 0,
                min_lr: schedule.current(),
            };
            let mut sentence = Vec::new();
            for doc in &docs[ranges[w].clone()] {
                sentence.clear();
                for &t in doc {
                    if ctx.rng.random::<f64>() < keep[t as usize] {
                        sentence.push(t);
                    }
                }
                ctx.add_work((doc.len() - sentence.len()) as u64);
                kernel.train_doc(&sentence, &mut ctx);
            }
            ctx.flush();
            (ctx.meter, ctx.min_lr)
        };
        let results: Vec<(LossMeter, f64)> = if ranges.len() == 1 {
            vec![run_worker(0)]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = (0..ranges.len()).map(|w| s.spawn(move || run_worker(w))).collect();
                handles.into_iter().map(|h| h.join().expect("training worker panicked")).collect()
            })
        };

        if !kernel.all_finite() {
            return Err(TrainError::NonFinite { epoch: epoch + 1 });
        }
        let (mut sum, mut n) = (0.0, 0u64);
        for (meter, min_lr) in results {
            sum += meter.epoch_sum;
            n += meter.epoch_examples;
            report.running_losses.extend(meter.samples);
            report.min_learning_rate = report.min_learning_rate.min(min_lr);
        }
        let mean = if n > 0 { sum / n as f64 } else { 0.0 };
        log::info!("epoch {}/{}: loss {:.6} lr {:.6}", epoch + 1, config.epochs, mean, schedule.current());
        report.epoch_losses.push(mean);
    }
    report.running_losses.sort_by_key(|&(t, _)| t);
    Ok(report)
}

pub(crate) fn check_model(config: &TrainingConfig, expected: ModelKind) -> Result<(), TrainError> {
    config.validate()?;
    if config.model != expected {
        return Err(TrainError::WrongModel { configured: config.model, expected });
    }
    Ok(())
}

struct Word2VecKernel {
    input: SharedMatrix,
    output: SharedMatrix,
    dim: usize,
    cbow: bool,
}

impl Word2VecKernel {
    fn new(rows: usize, dim: usize, seed: u64, cbow: bool) -> Self {
        Word2VecKernel {
            input: SharedMatrix::from_vec(uniform_init(rows * dim, 0.5 / dim as f32, seed, 0), dim),
            output: SharedMatrix::zeros(rows, dim),
            dim,
            cbow,
        }
    }

    fn train_cbow(&self, doc: &[u32], ctx: &mut WorkerCtx<'_>) {
        let dim = self.dim;
        let (mut hidden, mut step, mut out) = (vec![0.0f32; dim], vec![0.0f32; dim], vec![0.0f32; dim]);
        let mut negs = Vec::new();
        for (pos, &center) in doc.iter().enumerate() {
            let r = ctx.radius();
            let lo = pos.saturating_sub(r);
            let hi = (pos + r).min(doc.len() - 1);
            hidden.iter_mut().for_each(|h| *h = 0.0);
            let mut n_ctx = 0;
            for c in (lo..=hi).filter(|&c| c != pos) {
                self.input.accumulate_row(doc[c] as usize, &mut hidden);
                n_ctx += 1;
            }
            if n_ctx > 0 {
                let inv = 1.0 / n_ctx as f32;
                hidden.iter_mut().for_each(|h| *h *= inv);
                step.iter_mut().for_each(|s| *s = 0.0);
                ctx.draw_negatives(center, center, &mut negs);
                let mut loss = 0.0f32;
                for (target, positive) in std::iter::once((center, true)).chain(negs.iter().map(|&n| (n, false))) {
                    self.output.read_row(target as usize, &mut out);
                    loss += sgns_target(&hidden, &mut out, positive, ctx.lr, &mut step);
                    self.output.write_row(target as usize, &out);
                }
                // every context row receives the full hidden-layer step
                for c in (lo..=hi).filter(|&c| c != pos) {
                    self.input.add_row(doc[c] as usize, &step);
                }
                ctx.meter.record(loss as f64, 1);
            }
            ctx.center_done();
        }
    }

    fn train_skipgram(&self, doc: &[u32], ctx: &mut WorkerCtx<'_>) {
        let dim = self.dim;
        let (mut u, mut step, mut out) = (vec![0.0f32; dim], vec![0.0f32; dim], vec![0.0f32; dim]);
        let mut negs = Vec::new();
        for (pos, &center) in doc.iter().enumerate() {
            let r = ctx.radius();
            let lo = pos.saturating_sub(r);
            let hi = (pos + r).min(doc.len() - 1);
            self.input.read_row(center as usize, &mut u);
            for c in (lo..=hi).filter(|&c| c != pos) {
                let context = doc[c];
                step.iter_mut().for_each(|s| *s = 0.0);
                ctx.draw_negatives(center, context, &mut negs);
                let mut loss = 0.0f32;
                for (target, positive) in std::iter::once((context, true)).chain(negs.iter().map(|&n| (n, false))) {
                    self.output.read_row(target as usize, &mut out);
                    loss += sgns_target(&u, &mut out, positive, ctx.lr, &mut step);
                    self.output.write_row(target as usize, &out);
                }
                self.input.add_row(center as usize, &step);
                u.iter_mut().zip(&step).for_each(|(a, s)| *a += s);
                ctx.meter.record(loss as f64, 1);
            }
            ctx.center_done();
        }
    }

    fn finish(self, rows: usize, model: ModelKind) -> EmbeddingMatrix {
        EmbeddingMatrix {
            model,
            dim: self.dim,
            rows,
            input_vectors: self.input.into_vec(),
            output_vectors: self.output.into_vec(),
            subwords: None,
        }
    }
}

impl WindowKernel for Word2VecKernel {
    fn train_doc(&self, doc: &[u32], ctx: &mut WorkerCtx<'_>) {
        if self.cbow {
            self.train_cbow(doc, ctx)
        } else {
            self.train_skipgram(doc, ctx)
        }
    }

    fn all_finite(&self) -> bool {
        self.input.all_finite() && self.output.all_finite()
    }
}

fn train_word2vec<T: AsRef<str>>(
    corpus: &[Vec<T>],
    vocab: &Vocabulary,
    config: &TrainingConfig,
    model: ModelKind,
) -> Result<(EmbeddingMatrix, TrainReport), TrainError> {
    check_model(config, model)?;
    let docs = encode_corpus(corpus, vocab)?;
    let kernel = Word2VecKernel::new(vocab.len(), config.dimension, config.seed, model == ModelKind::Cbow);
    let report = drive(&docs, vocab, config, &kernel)?;
    Ok((kernel.finish(vocab.len(), model), report))
}

/// CBOW with negative sampling: the mean of the context input vectors
/// predicts the center token.
pub fn train_cbow<T: AsRef<str>>(
    corpus: &[Vec<T>],
    vocab: &Vocabulary,
    config: &TrainingConfig,
) -> Result<(EmbeddingMatrix, TrainReport), TrainError> {
    train_word2vec(corpus, vocab, config, ModelKind::Cbow)
}

/// Skip-gram with negative sampling: the center input vector predicts each
/// context token's output vector.
pub fn train_skipgram<T: AsRef<str>>(
    corpus: &[Vec<T>],
    vocab: &Vocabulary,
    config: &TrainingConfig,
) -> Result<(EmbeddingMatrix, TrainReport), TrainError> {
    train_word2vec(corpus, vocab, config, ModelKind::SkipGram)
}
