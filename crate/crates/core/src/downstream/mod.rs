//! Extrinsic evaluation: protein pair classification and drug-drug
//! interaction typing on top of a fixed embedding.
//!
//! For a given seed the data split and the initial network parameters do
//! not depend on which embedding is supplied, so two embeddings of equal
//! dimension are compared under identical conditions.

pub mod ddi;
pub mod metrics;
pub mod mlp;
pub mod ppi;

use std::io;

use serde::Serialize;
use thiserror::Error;

use crate::train::fnv1a_64;

pub use ddi::{read_ddi, run_ddi, sen_features, write_ddi, DdiInstance, DdiLabel, DdiReport, DdiSeedResult};
pub use metrics::{auc, evaluate_binary, evaluate_ddi, BinaryMetrics, DdiMetrics, MetricError, PrecisionRecall};
pub use mlp::{inverse_frequency_weights, mean_loss, softmax, train_mlp, Gradients, Head, Mlp, MlpError, MlpHyper, Sample, TrainingLog};
pub use ppi::{ppi_features, read_pairs, run_ppi, write_pairs, PairInstance, PpiReport};

#[derive(Debug, Error)]
pub enum DownstreamError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("sentence has no in-vocabulary token")]
    EmptySentence,
    #[error("token `{0}` not in the embedding")]
    UnknownToken(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("at least one seed is required")]
    NoSeeds,
    #[error("invalid split: {0}")]
    BadSplit(String),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Train / validation / test fractions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train: 0.63, validation: 0.07, test: 0.30 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DownstreamError> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f) || !f.is_finite()) {
            return Err(DownstreamError::BadSplit(format!("fractions must lie in [0, 1]: {parts:?}")));
        }
        if self.train == 0.0 || self.validation == 0.0 || self.test == 0.0 {
            return Err(DownstreamError::BadSplit("every part needs a positive fraction".into()));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DownstreamError::BadSplit(format!("fractions sum to {}, not 1", parts.iter().sum::<f64>())));
        }
        Ok(())
    }

    /// Cuts an already shuffled index list into the three parts.
    pub fn apply<'a>(&self, order: &'a [usize]) -> (&'a [usize], &'a [usize], &'a [usize]) {
        let n = order.len();
        let n_train = ((n as f64 * self.train).round() as usize).min(n);
        let n_val = ((n as f64 * self.validation).round() as usize).min(n - n_train);
        let (train, rest) = order.split_at(n_train);
        let (val, test) = rest.split_at(n_val);
        (train, val, test)
    }
}

/// FNV-1a over the index lists, with part boundaries marked.
pub fn indices_fingerprint(parts: &[&[usize]]) -> u64 {
    let mut bytes = Vec::new();
    for part in parts {
        for &i in *part {
            bytes.extend_from_slice(&(i as u64).to_le_bytes());
        }
        bytes.extend_from_slice(&u64::MAX.to_le_bytes());
    }
    fnv1a_64(&bytes)
}

pub(crate) fn init_seed(seed: u64) -> u64 {
    seed.wrapping_add(0x9E37_79B9_7F4A_7C15)
}

pub(crate) fn shuffle_seed(seed: u64) -> u64 {
    seed.wrapping_add(0x3C6E_F372_FE94_F82A)
}
