//! Skip-gram over subword-enriched inputs, except that concept tokens keep
//! a single vector with no character n-grams.

use super::shared::SharedMatrix;
use super::sgns::sgns_target;
use super::word2vec::{check_model, drive, WindowKernel, WorkerCtx};
use super::{
    encode_corpus, uniform_init, EmbeddingMatrix, FastTextConfig, ModelKind, SubwordVectors, TrainError, TrainReport,
    TrainingConfig,
};
use crate::vocab::Vocabulary;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Character n-grams of `<word>` with lengths `min_n..=max_n`, in order of
/// start position then length. The full delimited word is included only if
/// its length falls in range.
pub fn char_ngrams(word: &str, min_n: usize, max_n: usize) -> Vec<String> {
    let chars: Vec<char> = std::iter::once('<').chain(word.chars()).chain(std::iter::once('>')).collect();
    let mut out = Vec::new();
    for start in 0..chars.len() {
        for n in min_n..=max_n {
            if start + n > chars.len() {
                break;
            }
            out.push(chars[start..start + n].iter().collect());
        }
    }
    out
}

/// Bucket ids of a word's n-grams.
pub fn ngram_buckets(word: &str, config: &FastTextConfig) -> Vec<u32> {
    char_ngrams(word, config.min_ngram, config.max_ngram)
        .iter()
        .map(|g| (fnv1a_64(g.as_bytes()) % config.bucket_count as u64) as u32)
        .collect()
}

/// Bucket lists for every vocabulary entry, flattened.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubwordIndex {
    offsets: Vec<usize>,
    buckets: Vec<u32>,
}

impl SubwordIndex {
    /// Concept tokens get an empty list.
    pub fn build(vocab: &Vocabulary, config: &FastTextConfig) -> Self {
        let mut offsets = vec![0];
        let mut buckets = Vec::new();
        for e in vocab.entries() {
            if !e.is_concept {
                buckets.extend(ngram_buckets(&e.token, config));
            }
            offsets.push(buckets.len());
        }
        SubwordIndex { offsets, buckets }
    }

    pub fn buckets(&self, idx: usize) -> &[u32] {
        &self.buckets[self.offsets[idx]..self.offsets[idx + 1]]
    }
}

struct FastTextKernel {
    words: SharedMatrix,
    subwords: SharedMatrix,
    output: SharedMatrix,
    index: SubwordIndex,
    dim: usize,
}

impl FastTextKernel {
    /// Mean of the token row and its bucket rows.
    fn representation(&self, idx: usize, out: &mut [f32]) {
        self.words.read_row(idx, out);
        let buckets = self.index.buckets(idx);
        if buckets.is_empty() {
            return;
        }
        for &b in buckets {
            self.subwords.accumulate_row(b as usize, out);
        }
        let inv = 1.0 / (buckets.len() + 1) as f32;
        out.iter_mut().for_each(|v| *v *= inv);
    }
}

impl WindowKernel for FastTextKernel {
    fn train_doc(&self, doc: &[u32], ctx: &mut WorkerCtx<'_>) {
        let dim = self.dim;
        let (mut u, mut step, mut out) = (vec![0.0f32; dim], vec![0.0f32; dim], vec![0.0f32; dim]);
        let mut negs = Vec::new();
        for (pos, &center) in doc.iter().enumerate() {
            let r = ctx.radius();
            let lo = pos.saturating_sub(r);
            let hi = (pos + r).min(doc.len() - 1);
            self.representation(center as usize, &mut u);
            let buckets = self.index.buckets(center as usize);
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
                // each component takes the full step, so the mean moves by `step` too
                self.words.add_row(center as usize, &step);
                for &b in buckets {
                    self.subwords.add_row(b as usize, &step);
                }
                u.iter_mut().zip(&step).for_each(|(a, s)| *a += s);
                ctx.meter.record(loss as f64, 1);
            }
            ctx.center_done();
        }
    }

    fn all_finite(&self) -> bool {
        self.words.all_finite() && self.subwords.all_finite() && self.output.all_finite()
    }
}

/// Parameters before the first update: token and bucket rows uniform in
/// `[-1/dim, 1/dim)`, output rows zero.
pub fn initial_fasttext_matrix(vocab: &Vocabulary, config: &TrainingConfig, ft: &FastTextConfig) -> EmbeddingMatrix {
    let dim = config.dimension;
    let scale = 1.0 / dim as f32;
    EmbeddingMatrix {
        model: ModelKind::FastTextVariant,
        dim,
        rows: vocab.len(),
        input_vectors: uniform_init(vocab.len() * dim, scale, config.seed, 0),
        output_vectors: vec![0.0; vocab.len() * dim],
        subwords: Some(SubwordVectors {
            bucket_count: ft.bucket_count,
            vectors: uniform_init(ft.bucket_count * dim, scale, config.seed, 1),
            index: SubwordIndex::build(vocab, ft),
        }),
    }
}

pub fn train_fasttext_variant<T: AsRef<str>>(
    corpus: &[Vec<T>],
    vocab: &Vocabulary,
    config: &TrainingConfig,
    ft: &FastTextConfig,
) -> Result<(EmbeddingMatrix, TrainReport), TrainError> {
    check_model(config, ModelKind::FastTextVariant)?;
    ft.validate()?;
    let docs = encode_corpus(corpus, vocab)?;
    let init = initial_fasttext_matrix(vocab, config, ft);
    let dim = init.dim;
    let sub = init.subwords.expect("fastText matrix has subwords");
    let kernel = FastTextKernel {
        words: SharedMatrix::from_vec(init.input_vectors, dim),
        subwords: SharedMatrix::from_vec(sub.vectors, dim),
        output: SharedMatrix::from_vec(init.output_vectors, dim),
        index: sub.index,
        dim,
    };
    let report = drive(&docs, vocab, config, &kernel)?;
    let FastTextKernel { words, subwords, output, index, .. } = kernel;
    let matrix = EmbeddingMatrix {
        model: ModelKind::FastTextVariant,
        dim,
        rows: vocab.len(),
        input_vectors: words.into_vec(),
        output_vectors: output.into_vec(),
        subwords: Some(SubwordVectors { bucket_count: ft.bucket_count, vectors: subwords.into_vec(), index }),
    };
    Ok((matrix, report))
}
