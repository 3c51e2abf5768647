//! Distance-weighted co-occurrence counting and GloVe factorization with
//! per-parameter AdaGrad steps.

use std::collections::HashMap;

use num_traits::Float;
use rand::seq::SliceRandom;

use super::shared::SharedMatrix;
use super::sgns::dot;
use super::word2vec::check_model;
use super::{
    encode_corpus, partition, stream_rng, uniform_init, EmbeddingMatrix, GloveConfig, ModelKind, TrainError,
    TrainReport, TrainingConfig,
};
use crate::vocab::Vocabulary;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoocEntry {
    pub row: u32,
    pub col: u32,
    pub value: f64,
}

/// Sparse symmetric co-occurrence counts, sorted by `(row, col)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoocMatrix {
    pub vocab_size: usize,
    pub entries: Vec<CoocEntry>,
}

impl CoocMatrix {
    pub fn from_map(vocab_size: usize, map: HashMap<(u32, u32), f64>) -> Self {
        let mut entries: Vec<CoocEntry> =
            map.into_iter().map(|((row, col), value)| CoocEntry { row, col, value }).collect();
        entries.sort_by_key(|e| (e.row, e.col));
        CoocMatrix { vocab_size, entries }
    }

    pub fn get(&self, row: u32, col: u32) -> Option<f64> {
        self.entries.binary_search_by_key(&(row, col), |e| (e.row, e.col)).ok().map(|i| self.entries[i].value)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Adds `1/d` to `X[a][b]` and `X[b][a]` for every pair of in-vocabulary
/// tokens at distance `d ≤ window` within the same document. No
/// subsampling is applied.
pub fn build_cooccurrence<T: AsRef<str>>(corpus: &[Vec<T>], vocab: &Vocabulary, window: usize, workers: usize) -> CoocMatrix {
    let docs: Vec<Vec<u32>> = corpus.iter().map(|d| vocab.encode(d)).collect();
    match exact_unit(window) {
        // integer multiples of 1/lcm(1..=window): sums are exact, so any worker split agrees
        Some(lcm) => {
            let partials = map_partitions(&docs, workers, |doc, map: &mut HashMap<(u32, u32), u64>| {
                for (i, &a) in doc.iter().enumerate() {
                    for (d, &b) in doc[i + 1..].iter().take(window).enumerate() {
                        let w = lcm / (d as u64 + 1);
                        *map.entry((a, b)).or_insert(0) += w;
                        *map.entry((b, a)).or_insert(0) += w;
                    }
                }
            });
            let mut merged: HashMap<(u32, u32), u64> = HashMap::new();
            for partial in partials {
                for (k, v) in partial {
                    *merged.entry(k).or_insert(0) += v;
                }
            }
            let scale = lcm as f64;
            CoocMatrix::from_map(vocab.len(), merged.into_iter().map(|(k, v)| (k, v as f64 / scale)).collect())
        }
        None => {
            let partials = map_partitions(&docs, workers, |doc, map: &mut HashMap<(u32, u32), f64>| {
                for (i, &a) in doc.iter().enumerate() {
                    for (d, &b) in doc[i + 1..].iter().take(window).enumerate() {
                        let w = 1.0 / (d + 1) as f64;
                        *map.entry((a, b)).or_insert(0.0) += w;
                        *map.entry((b, a)).or_insert(0.0) += w;
                    }
                }
            });
            let mut merged: HashMap<(u32, u32), f64> = HashMap::new();
            for partial in partials {
                let mut keys: Vec<_> = partial.into_iter().collect();
                keys.sort_by_key(|&(k, _)| k);
                for (k, v) in keys {
                    *merged.entry(k).or_insert(0.0) += v;
                }
            }
            CoocMatrix::from_map(vocab.len(), merged)
        }
    }
}

/// `lcm(1..=window)` while it stays small enough for exact integer counting.
fn exact_unit(window: usize) -> Option<u64> {
    let mut lcm = 1u64;
    for d in 1..=window as u64 {
        let g = gcd(lcm, d);
        lcm = (lcm / g).checked_mul(d)?;
        if lcm > 1 << 32 {
            return None;
        }
    }
    Some(lcm)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn map_partitions<M: Default + Send>(docs: &[Vec<u32>], workers: usize, add: impl Fn(&[u32], &mut M) + Sync) -> Vec<M> {
    let count = |docs: &[Vec<u32>]| {
        let mut map = M::default();
        for doc in docs {
            add(doc, &mut map);
        }
        map
    };
    let ranges = partition(docs.len(), workers);
    if ranges.len() <= 1 {
        return vec![count(docs)];
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = ranges.iter().map(|r| s.spawn(|| count(&docs[r.clone()]))).collect();
        handles.into_iter().map(|h| h.join().expect("co-occurrence worker panicked")).collect()
    })
}

/// `min(1, (x / x_max)^alpha)`
pub fn glove_weight(x: f64, x_max: f64, alpha: f64) -> f64 {
    if x >= x_max {
        1.0
    } else {
        (x / x_max).powf(alpha)
    }
}

/// One side (main or context) of a pair: vector, bias and their squared
/// gradient accumulators.
pub struct GloveParams<'a, T> {
    pub vector: &'a mut [T],
    pub bias: &'a mut T,
    pub vector_gsq: &'a mut [T],
    pub bias_gsq: &'a mut T,
}

/// Loss `f·(w·w̃ + b + b̃ − ln x)²` of one pair and the shared gradient
/// factor `2·f·diff`; `∂/∂w = factor·w̃`, `∂/∂b = factor`.
pub fn glove_pair_gradient<T: Float>(w: &[T], wc: &[T], b: T, bc: T, x: T, weight: T) -> (T, T) {
    let diff = dot(w, wc) + b + bc - x.ln();
    (weight * diff * diff, (T::one() + T::one()) * weight * diff)
}

/// AdaGrad step on one pair: `θ -= step·g/√G`, then `G += g²`. Returns the
/// pre-update loss.
pub fn glove_pair_update<T: Float>(main: GloveParams<'_, T>, ctx: GloveParams<'_, T>, x: T, weight: T, step: T) -> T {
    let (loss, factor) = glove_pair_gradient(main.vector, ctx.vector, *main.bias, *ctx.bias, x, weight);
    for i in 0..main.vector.len() {
        let gw = factor * ctx.vector[i];
        let gc = factor * main.vector[i];
        main.vector[i] = main.vector[i] - step * gw / main.vector_gsq[i].sqrt();
        ctx.vector[i] = ctx.vector[i] - step * gc / ctx.vector_gsq[i].sqrt();
        main.vector_gsq[i] = main.vector_gsq[i] + gw * gw;
        ctx.vector_gsq[i] = ctx.vector_gsq[i] + gc * gc;
    }
    *main.bias = *main.bias - step * factor / main.bias_gsq.sqrt();
    *ctx.bias = *ctx.bias - step * factor / ctx.bias_gsq.sqrt();
    *main.bias_gsq = *main.bias_gsq + factor * factor;
    *ctx.bias_gsq = *ctx.bias_gsq + factor * factor;
    loss
}

struct GloveState {
    w: SharedMatrix,
    wc: SharedMatrix,
    b: SharedMatrix,
    bc: SharedMatrix,
    gw: SharedMatrix,
    gwc: SharedMatrix,
    gb: SharedMatrix,
    gbc: SharedMatrix,
    dim: usize,
}

impl GloveState {
    fn new(rows: usize, dim: usize, seed: u64) -> Self {
        let scale = 0.5 / dim as f32;
        GloveState {
            w: SharedMatrix::from_vec(uniform_init(rows * dim, scale, seed, 0), dim),
            wc: SharedMatrix::from_vec(uniform_init(rows * dim, scale, seed, 1), dim),
            b: SharedMatrix::zeros(rows, 1),
            bc: SharedMatrix::zeros(rows, 1),
            gw: SharedMatrix::from_vec(vec![1.0; rows * dim], dim),
            gwc: SharedMatrix::from_vec(vec![1.0; rows * dim], dim),
            gb: SharedMatrix::from_vec(vec![1.0; rows], 1),
            gbc: SharedMatrix::from_vec(vec![1.0; rows], 1),
            dim,
        }
    }

    fn update(&self, e: &CoocEntry, weight: f32, step: f32, buf: &mut [Vec<f32>; 4]) -> f32 {
        let (i, j) = (e.row as usize, e.col as usize);
        let [w, wc, gw, gwc] = buf;
        self.w.read_row(i, w);
        self.wc.read_row(j, wc);
        self.gw.read_row(i, gw);
        self.gwc.read_row(j, gwc);
        let (mut b, mut bc) = (self.b.get(i, 0), self.bc.get(j, 0));
        let (mut gb, mut gbc) = (self.gb.get(i, 0), self.gbc.get(j, 0));
        let loss = glove_pair_update(
            GloveParams { vector: w, bias: &mut b, vector_gsq: gw, bias_gsq: &mut gb },
            GloveParams { vector: wc, bias: &mut bc, vector_gsq: gwc, bias_gsq: &mut gbc },
            e.value as f32,
            weight,
            step,
        );
        self.w.write_row(i, w);
        self.wc.write_row(j, wc);
        self.gw.write_row(i, gw);
        self.gwc.write_row(j, gwc);
        self.b.set(i, 0, b);
        self.bc.set(j, 0, bc);
        self.gb.set(i, 0, gb);
        self.gbc.set(j, 0, gbc);
        loss
    }

    /// Full weighted objective at the current parameters.
    fn objective(&self, cooc: &CoocMatrix, weights: &[f32]) -> f64 {
        let (mut w, mut wc) = (vec![0.0f32; self.dim], vec![0.0f32; self.dim]);
        let mut total = 0.0f64;
        for (e, &f) in cooc.entries.iter().zip(weights) {
            self.w.read_row(e.row as usize, &mut w);
            self.wc.read_row(e.col as usize, &mut wc);
            let diff = w.iter().zip(&wc).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>()
                + self.b.get(e.row as usize, 0) as f64
                + self.bc.get(e.col as usize, 0) as f64
                - e.value.ln();
            total += f as f64 * diff * diff;
        }
        total
    }

    fn all_finite(&self) -> bool {
        self.w.all_finite() && self.wc.all_finite() && self.b.all_finite() && self.bc.all_finite()
    }
}

/// Fits `w·w̃ + b + b̃ ≈ ln X` under the clipped weighting. Epoch losses are
/// the full objective after each epoch.
pub fn train_glove(
    cooc: &CoocMatrix,
    config: &TrainingConfig,
    glove: &GloveConfig,
) -> Result<(EmbeddingMatrix, TrainReport), TrainError> {
    check_model(config, ModelKind::Glove)?;
    glove.validate()?;
    if cooc.is_empty() {
        return Err(TrainError::EmptyCooccurrence);
    }
    let rows = cooc.vocab_size;
    let dim = config.dimension;
    let state = GloveState::new(rows, dim, config.seed);
    let weights: Vec<f32> =
        cooc.entries.iter().map(|e| glove_weight(e.value, glove.x_max, glove.weight_alpha) as f32).collect();
    let step = glove.initial_step as f32;
    let mut order: Vec<usize> = (0..cooc.len()).collect();
    let ranges = partition(order.len(), config.workers);
    let mut report = TrainReport { min_learning_rate: glove.initial_step, ..Default::default() };

    for epoch in 0..config.epochs {
        order.shuffle(&mut stream_rng(config.seed, 0xFFFF, epoch));
        let run = |r: std::ops::Range<usize>| {
            let mut buf = [vec![0.0f32; dim], vec![0.0f32; dim], vec![0.0f32; dim], vec![0.0f32; dim]];
            for &k in &order[r] {
                state.update(&cooc.entries[k], weights[k], step, &mut buf);
            }
        };
        if ranges.len() == 1 {
            run(ranges[0].clone());
        } else {
            std::thread::scope(|s| {
                for r in &ranges {
                    s.spawn(|| run(r.clone()));
                }
            });
        }
        if !state.all_finite() {
            return Err(TrainError::NonFinite { epoch: epoch + 1 });
        }
        let loss = state.objective(cooc, &weights);
        log::info!("epoch {}/{}: glove objective {:.6}", epoch + 1, config.epochs, loss);
        report.epoch_losses.push(loss);
        report.running_losses.push(((epoch as u64 + 1) * cooc.len() as u64, loss / cooc.len() as f64));
    }
    let matrix = EmbeddingMatrix {
        model: ModelKind::Glove,
        dim,
        rows,
        input_vectors: state.w.into_vec(),
        output_vectors: state.wc.into_vec(),
        subwords: None,
    };
    Ok((matrix, report))
}

/// Convenience wrapper: count co-occurrences over `corpus`, then factorize.
pub fn train_glove_on_corpus<T: AsRef<str>>(
    corpus: &[Vec<T>],
    vocab: &Vocabulary,
    config: &TrainingConfig,
    glove: &GloveConfig,
) -> Result<(EmbeddingMatrix, TrainReport), TrainError> {
    encode_corpus(corpus, vocab)?;
    let cooc = build_cooccurrence(corpus, vocab, config.window, config.workers);
    train_glove(&cooc, config, glove)
}
