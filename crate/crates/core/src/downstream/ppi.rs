//! Protein pair classification from concatenated concept vectors.

use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::metrics::{evaluate_binary, BinaryMetrics};
use super::mlp::{train_mlp, Mlp, MlpHyper, Sample, TrainingLog};
use super::{indices_fingerprint, DownstreamError, SplitSpec};
use crate::embedding::Embedding;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairInstance {
    pub token_a: String,
    pub token_b: String,
    pub label: bool,
}

/// Reads `token_a<TAB>token_b<TAB>0|1` lines.
pub fn read_pairs<R: BufRead>(reader: R) -> Result<Vec<PairInstance>, DownstreamError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |message: String| DownstreamError::Format { line: i + 1, message };
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let label = match fields[2].trim() {
            "1" => true,
            "0" => false,
            other => return Err(bad(format!("label must be 0 or 1, found `{other}`"))),
        };
        out.push(PairInstance { token_a: fields[0].to_string(), token_b: fields[1].to_string(), label });
    }
    Ok(out)
}

pub fn write_pairs<W: Write>(mut out: W, pairs: &[PairInstance]) -> io::Result<()> {
    for p in pairs {
        writeln!(out, "{}\t{}\t{}", p.token_a, p.token_b, u8::from(p.label))?;
    }
    Ok(())
}

/// `[vec(a); vec(b)]` in file order, or `None` if either token is unknown.
pub fn ppi_features(pair: &PairInstance, embedding: &Embedding) -> Option<Vec<f64>> {
    let a = embedding.vector(&pair.token_a)?;
    let b = embedding.vector(&pair.token_b)?;
    Some(a.iter().chain(b).map(|&v| v as f64).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PpiReport {
    pub metrics: BinaryMetrics,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    /// Instances dropped for an unknown token, over all splits.
    pub dropped: usize,
    pub split_fingerprint: u64,
    pub init_fingerprint: u64,
    pub layer_sizes: Vec<usize>,
    pub hyper: MlpHyper,
    pub log: TrainingLog,
}

/// Splits the full file by seed (before any token filtering, so splits do
/// not depend on the embedding), trains on the training part with early
/// stopping on validation and scores the test part.
pub fn run_ppi(
    pairs: &[PairInstance],
    embedding: &Embedding,
    split: &SplitSpec,
    hyper: &MlpHyper,
    seed: u64,
) -> Result<PpiReport, DownstreamError> {
    split.validate()?;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train_idx, val_idx, test_idx) = split.apply(&order);
    let split_fingerprint = indices_fingerprint(&[train_idx, val_idx, test_idx]);

    let mut dropped = 0;
    let mut featurize = |idx: &[usize]| -> Vec<(Sample, bool)> {
        idx.iter()
            .filter_map(|&i| {
                let p = &pairs[i];
                let x = ppi_features(p, embedding);
                if x.is_none() {
                    dropped += 1;
                }
                x.map(|x| (Sample { x, label: usize::from(p.label) }, p.label))
            })
            .collect()
    };
    let train: Vec<Sample> = featurize(train_idx).into_iter().map(|s| s.0).collect();
    let validation: Vec<Sample> = featurize(val_idx).into_iter().map(|s| s.0).collect();
    let test = featurize(test_idx);
    if test.is_empty() {
        return Err(DownstreamError::EmptySplit("test"));
    }

    let sizes = hyper.layer_sizes(2 * embedding.dim(), 2);
    let mlp = Mlp::new(&sizes, super::init_seed(seed))?;
    let init_fingerprint = mlp.fingerprint();
    let (mlp, log) = train_mlp(mlp, &train, &validation, hyper, None, super::shuffle_seed(seed))?;

    let mut scores = Vec::with_capacity(test.len());
    for (s, _) in &test {
        scores.push(mlp.forward(&s.x)?[0]);
    }
    let labels: Vec<bool> = test.iter().map(|t| t.1).collect();
    let metrics = evaluate_binary(&scores, &labels, 0.5)?;
    Ok(PpiReport {
        metrics,
        train_size: train.len(),
        validation_size: validation.len(),
        test_size: test.len(),
        dropped,
        split_fingerprint,
        init_fingerprint,
        layer_sizes: sizes,
        hyper: hyper.clone(),
        log,
    })
}
