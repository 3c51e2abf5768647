//! Training vocabulary, frequent-token subsampling and the negative-sampling
//! table.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use rand::Rng;
use thiserror::Error;

use crate::corpus::is_concept_token;

/// Exponent applied to counts in the noise distribution.
pub const NEGATIVE_POWER: f64 = 0.75;

/// Default negative-table length.
pub const DEFAULT_TABLE_SIZE: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("min_count must be at least 1")]
    ZeroMinCount,
    #[error("no token reaches min_count {0}")]
    Empty(u64),
    #[error("vocabulary file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VocabEntry {
    pub token: String,
    pub count: u64,
    pub is_concept: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    index: HashMap<String, usize>,
    total_tokens: u64,
}

impl Vocabulary {
    /// Counts tokens over the documents and keeps those seen at least
    /// `min_count` times.
    pub fn build<D, T>(documents: D, min_count: u64) -> Result<Self, VocabError>
    where
        D: IntoIterator,
        D::Item: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        if min_count == 0 {
            return Err(VocabError::ZeroMinCount);
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for doc in documents {
            for tok in doc {
                let tok = tok.as_ref();
                if let Some(c) = counts.get_mut(tok) {
                    *c += 1;
                } else {
                    counts.insert(tok.to_string(), 1);
                }
            }
        }
        let entries = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .map(|(token, count)| VocabEntry { is_concept: is_concept_token(&token), token, count })
            .collect();
        Self::from_entries(entries).map_err(|_| VocabError::Empty(min_count))
    }

    fn from_entries(mut entries: Vec<VocabEntry>) -> Result<Self, VocabError> {
        if entries.is_empty() {
            return Err(VocabError::Empty(0));
        }
        entries.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.token.cmp(&b.token)));
        let index = entries.iter().enumerate().map(|(i, e)| (e.token.clone(), i)).collect();
        let total_tokens = entries.iter().map(|e| e.count).sum();
        Ok(Vocabulary { entries, index, total_tokens })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.entries[idx].token
    }

    pub fn count(&self, idx: usize) -> u64 {
        self.entries[idx].count
    }

    pub fn is_concept(&self, idx: usize) -> bool {
        self.entries[idx].is_concept
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Relative frequency of the entry.
    pub fn frequency(&self, idx: usize) -> f64 {
        self.entries[idx].count as f64 / self.total_tokens as f64
    }

    /// Maps a document onto vocabulary indices, dropping unknown tokens.
    pub fn encode<T: AsRef<str>>(&self, doc: &[T]) -> Vec<u32> {
        doc.iter().filter_map(|t| self.get(t.as_ref())).map(|i| i as u32).collect()
    }

    /// Per-entry keep probabilities for subsampling.
    pub fn keep_probabilities(&self, threshold: f64) -> Vec<f64> {
        (0..self.len()).map(|i| keep_probability_for_frequency(self.frequency(i), threshold)).collect()
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "#total {}", self.total_tokens)?;
        for e in &self.entries {
            writeln!(out, "{}\t{}", e.token, e.count)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, VocabError> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or(VocabError::Format { line: 1, message: "missing header".into() })??;
        let total: u64 = header
            .strip_prefix("#total ")
            .and_then(|n| n.trim().parse().ok())
            .ok_or(VocabError::Format { line: 1, message: "expected `#total <N>`".into() })?;
        let mut entries = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            let (token, count) = line
                .split_once('\t')
                .and_then(|(t, c)| Some((t, c.trim().parse::<u64>().ok()?)))
                .ok_or_else(|| VocabError::Format { line: lineno, message: "expected `token<TAB>count`".into() })?;
            entries.push(VocabEntry { token: token.to_string(), count, is_concept: is_concept_token(token) });
        }
        let vocab = Self::from_entries(entries)?;
        if vocab.total_tokens != total || vocab.index.len() != vocab.entries.len() {
            return Err(VocabError::Format { line: 1, message: "header total does not match entries".into() });
        }
        Ok(vocab)
    }
}

/// `min(1, sqrt(threshold / f))` where `f` is the token's relative
/// frequency. Panics if the token is not in the vocabulary.
pub fn keep_probability(token: &str, vocab: &Vocabulary, threshold: f64) -> f64 {
    let idx = vocab.get(token).unwrap_or_else(|| panic!("{token} not in vocabulary"));
    keep_probability_for_frequency(vocab.frequency(idx), threshold)
}

pub fn keep_probability_for_frequency(frequency: f64, threshold: f64) -> f64 {
    debug_assert!(threshold > 0.0);
    (threshold / frequency).sqrt().min(1.0)
}

/// Lookup table realizing the smoothed unigram distribution
/// `count^0.75 / sum(count^0.75)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NegativeTable {
    table: Vec<u32>,
}

impl NegativeTable {
    pub fn new(vocab: &Vocabulary, size: usize) -> Self {
        let size = size.max(vocab.len());
        let weights: Vec<f64> = vocab.entries().iter().map(|e| (e.count as f64).powf(NEGATIVE_POWER)).collect();
        let total: f64 = weights.iter().sum();
        let mut table = Vec::with_capacity(size);
        let mut idx = 0usize;
        let mut cumulative = weights[0] / total;
        for slot in 0..size {
            table.push(idx as u32);
            // advance once the filled fraction passes the cumulative mass
            if (slot as f64 + 1.0) / size as f64 > cumulative && idx + 1 < weights.len() {
                idx += 1;
                cumulative += weights[idx] / total;
            }
        }
        NegativeTable { table }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.table
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.table[rng.random_range(0..self.table.len())]
    }
}

/// `build_negative_table` under its operation name.
pub fn build_negative_table(vocab: &Vocabulary, size: usize) -> NegativeTable {
    NegativeTable::new(vocab, size)
}

/// `build_vocab` under its operation name.
pub fn build_vocab<D, T>(documents: D, min_count: u64) -> Result<Vocabulary, VocabError>
where
    D: IntoIterator,
    D::Item: IntoIterator<Item = T>,
    T: AsRef<str>,
{
    Vocabulary::build(documents, min_count)
}
