//! Drug-drug interaction typing from averaged sentence vectors, optionally
//! augmented with the two drugs' concept vectors.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate_ddi, DdiMetrics, PrecisionRecall};
use super::mlp::{inverse_frequency_weights, train_mlp, Mlp, MlpHyper, Sample, TrainingLog};
use super::{indices_fingerprint, DownstreamError};
use crate::embedding::Embedding;

/// Fraction of the training file held out for early stopping.
pub const DDI_VALIDATION_FRACTION: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DdiLabel {
    Mechanism,
    Effect,
    Advice,
    Int,
    Negative,
}

impl DdiLabel {
    pub const ALL: [DdiLabel; 5] = [Self::Mechanism, Self::Effect, Self::Advice, Self::Int, Self::Negative];
    pub const POSITIVE: [DdiLabel; 4] = [Self::Mechanism, Self::Effect, Self::Advice, Self::Int];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_positive(self) -> bool {
        self != Self::Negative
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mechanism => "mechanism",
            Self::Effect => "effect",
            Self::Advice => "advice",
            Self::Int => "int",
            Self::Negative => "negative",
        }
    }
}

impl fmt::Display for DdiLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DdiLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown DDI label `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DdiInstance {
    pub tokens: Vec<String>,
    pub drug_a: String,
    pub drug_b: String,
    pub label: DdiLabel,
}

/// One JSON object per line.
pub fn read_ddi<R: BufRead>(reader: R) -> Result<Vec<DdiInstance>, DownstreamError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: DdiInstance =
            serde_json::from_str(&line).map_err(|e| DownstreamError::Format { line: i + 1, message: e.to_string() })?;
        for drug in [&inst.drug_a, &inst.drug_b] {
            if !inst.tokens.contains(drug) {
                return Err(DownstreamError::Format { line: i + 1, message: format!("drug `{drug}` not in the sentence") });
            }
        }
        out.push(inst);
    }
    Ok(out)
}

pub fn write_ddi<W: Write>(mut out: W, instances: &[DdiInstance]) -> io::Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut out, inst)?;
        writeln!(out)?;
    }
    Ok(())
}

/// Mean of the in-vocabulary sentence token vectors, followed by the two
/// drug vectors when `augment_concepts` is set. Returns the features and the
/// number of skipped out-of-vocabulary tokens.
pub fn sen_features(
    instance: &DdiInstance,
    embedding: &Embedding,
    augment_concepts: bool,
) -> Result<(Vec<f64>, usize), DownstreamError> {
    let dim = embedding.dim();
    let mut mean = vec![0.0f64; dim];
    let mut known = 0usize;
    for t in &instance.tokens {
        if let Some(v) = embedding.vector(t) {
            mean.iter_mut().zip(v).for_each(|(m, &x)| *m += x as f64);
            known += 1;
        }
    }
    if known == 0 {
        return Err(DownstreamError::EmptySentence);
    }
    mean.iter_mut().for_each(|m| *m /= known as f64);
    if augment_concepts {
        for drug in [&instance.drug_a, &instance.drug_b] {
            let v = embedding.vector(drug).ok_or_else(|| DownstreamError::UnknownToken(drug.clone()))?;
            mean.extend(v.iter().map(|&x| x as f64));
        }
    }
    Ok((mean, instance.tokens.len() - known))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DdiSeedResult {
    pub seed: u64,
    pub metrics: DdiMetrics,
    pub split_fingerprint: u64,
    pub init_fingerprint: u64,
    pub log: TrainingLog,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DdiReport {
    pub per_seed: Vec<DdiSeedResult>,
    /// Mean micro scores over seeds.
    pub mean_micro: PrecisionRecall,
    /// Mean per-type F1 over seeds: mechanism, effect, advice, int.
    pub mean_type_f1: [f64; 4],
    /// Population standard deviation of micro F1 over seeds.
    pub micro_f1_std: f64,
    pub augment_concepts: bool,
    pub layer_sizes: Vec<usize>,
    pub hyper: MlpHyper,
    /// Instances dropped for an empty sentence or unknown drug.
    pub dropped_train: usize,
    pub dropped_test: usize,
    pub oov_tokens: usize,
}

fn featurize(
    instances: &[DdiInstance],
    embedding: &Embedding,
    augment: bool,
) -> (Vec<Option<Sample>>, usize, usize) {
    let (mut dropped, mut oov) = (0, 0);
    let samples = instances
        .iter()
        .map(|inst| match sen_features(inst, embedding, augment) {
            Ok((x, missing)) => {
                oov += missing;
                Some(Sample { x, label: inst.label.index() })
            }
            Err(_) => {
                dropped += 1;
                None
            }
        })
        .collect();
    (samples, dropped, oov)
}

/// Trains one network per seed on the training file (minus a seeded
/// validation slice) and scores the test file.
pub fn run_ddi(
    train: &[DdiInstance],
    test: &[DdiInstance],
    embedding: &Embedding,
    hyper: &MlpHyper,
    seeds: &[u64],
    augment_concepts: bool,
) -> Result<DdiReport, DownstreamError> {
    if seeds.is_empty() {
        return Err(DownstreamError::NoSeeds);
    }
    let (train_feats, dropped_train, oov_train) = featurize(train, embedding, augment_concepts);
    let (test_feats, dropped_test, oov_test) = featurize(test, embedding, augment_concepts);
    let test_pairs: Vec<(&Sample, DdiLabel)> =
        test_feats.iter().zip(test).filter_map(|(s, inst)| s.as_ref().map(|s| (s, inst.label))).collect();
    if test_pairs.is_empty() {
        return Err(DownstreamError::EmptySplit("test"));
    }
    let width = if augment_concepts { 3 * embedding.dim() } else { embedding.dim() };
    let sizes = hyper.layer_sizes(width, DdiLabel::ALL.len());

    let mut per_seed = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_val = ((train.len() as f64 * DDI_VALIDATION_FRACTION).round() as usize).clamp(1, train.len().max(1));
        let (val_idx, train_idx) = order.split_at(n_val.min(order.len()));
        let split_fingerprint = indices_fingerprint(&[train_idx, val_idx]);
        let pick = |idx: &[usize]| -> Vec<Sample> { idx.iter().filter_map(|&i| train_feats[i].clone()).collect() };
        let (tr, va) = (pick(train_idx), pick(val_idx));
        let weights = inverse_frequency_weights(tr.iter().map(|s| s.label), DdiLabel::ALL.len());
        let mlp = Mlp::new(&sizes, super::init_seed(seed))?;
        let init_fingerprint = mlp.fingerprint();
        let (mlp, log) = train_mlp(mlp, &tr, &va, hyper, Some(&weights), super::shuffle_seed(seed))?;
        let mut predictions = Vec::with_capacity(test_pairs.len());
        for (s, _) in &test_pairs {
            predictions.push(DdiLabel::from_index(mlp.predict_class(&s.x)?).expect("softmax head has 5 classes"));
        }
        let gold: Vec<DdiLabel> = test_pairs.iter().map(|t| t.1).collect();
        let metrics = evaluate_ddi(&predictions, &gold)?;
        per_seed.push(DdiSeedResult { seed, metrics, split_fingerprint, init_fingerprint, log });
    }

    let n = per_seed.len() as f64;
    // shifted by the first value so that identical runs average exactly
    let mean_of = |f: &dyn Fn(&DdiSeedResult) -> f64| {
        let first = f(&per_seed[0]);
        first + per_seed.iter().map(|r| f(r) - first).sum::<f64>() / n
    };
    let mean_micro = PrecisionRecall {
        precision: mean_of(&|r| r.metrics.micro.precision),
        recall: mean_of(&|r| r.metrics.micro.recall),
        f1: mean_of(&|r| r.metrics.micro.f1),
    };
    let mean_type_f1 = std::array::from_fn(|t| mean_of(&|r| r.metrics.per_type[t].f1));
    let micro_f1_std = mean_of(&|r| (r.metrics.micro.f1 - mean_micro.f1).powi(2)).sqrt();
    Ok(DdiReport {
        per_seed,
        mean_micro,
        mean_type_f1,
        micro_f1_std,
        augment_concepts,
        layer_sizes: sizes,
        hyper: hyper.clone(),
        dropped_train,
        dropped_test,
        oov_tokens: oov_train + oov_test,
    })
}
