//! Group similarity difference: how much more similar related concepts are
//! than an equally sized random set.
//!
//! Raw cosines over every distinct pair occurring in the dataset's sets are
//! z-scored (population statistics) and then min-max scaled into `[0, 1]`.
//! A set's similarity is the mean over its pairs; a group's score is
//! related minus unrelated, and the dataset metric is the unweighted mean
//! over groups, in percentage points.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, BufRead, Write};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine, Embedding, EmbeddingError};

pub const DEFAULT_MAX_SET: usize = 100;
pub const DEFAULT_MIN_SET: usize = 2;

#[derive(Debug, Error)]
pub enum IntrinsicError {
    #[error("dataset has no groups")]
    EmptyDataset,
    #[error("group {group}: set needs at least 2 tokens, has {size}")]
    SetTooSmall { group: String, size: usize },
    #[error("pair ({0}, {1}) missing from the similarity table")]
    MissingPair(String, String),
    #[error("token `{0}` not in the embedding")]
    UnknownToken(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptGroup {
    pub group_id: String,
    pub related: Vec<String>,
    pub unrelated: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroupDataset {
    pub name: String,
    pub groups: Vec<ConceptGroup>,
    pub provenance: String,
}

impl GroupDataset {
    /// One JSON object per line.
    pub fn read_jsonl<R: BufRead>(reader: R, name: impl Into<String>) -> Result<Self, IntrinsicError> {
        let mut groups = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let g: ConceptGroup = serde_json::from_str(&line)
                .map_err(|e| IntrinsicError::Format { line: i + 1, message: e.to_string() })?;
            groups.push(g);
        }
        Ok(GroupDataset { name: name.into(), groups, provenance: String::new() })
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for g in &self.groups {
            serde_json::to_writer(&mut out, g)?;
            writeln!(out)?;
        }
        Ok(())
    }

    /// Distinct tokens over all sets.
    pub fn tokens(&self) -> BTreeSet<&str> {
        self.groups.iter().flat_map(|g| g.related.iter().chain(&g.unrelated)).map(String::as_str).collect()
    }
}

/// Groups that could not be built.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GroupBuildReport {
    pub too_small: Vec<String>,
    pub truncated: Vec<String>,
    pub universe_exhausted: Vec<String>,
}

/// Reads `key<TAB>member` lines into an association map.
pub fn read_associations<R: BufRead>(reader: R) -> Result<BTreeMap<String, BTreeSet<String>>, IntrinsicError> {
    let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (k, m) = line
            .split_once('\t')
            .ok_or_else(|| IntrinsicError::Format { line: i + 1, message: "expected `key<TAB>member`".into() })?;
        map.entry(k.trim().to_string()).or_default().insert(m.trim().to_string());
    }
    Ok(map)
}

/// One group per association key whose in-universe members number at least
/// `min_size`; larger sets are sampled down to `max_size`. The unrelated
/// set is drawn uniformly without replacement from `universe \ related`.
pub fn build_groups(
    associations: &BTreeMap<String, BTreeSet<String>>,
    universe: &BTreeSet<String>,
    max_size: usize,
    min_size: usize,
    seed: u64,
) -> (GroupDataset, GroupBuildReport) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<&String> = universe.iter().collect();
    let mut report = GroupBuildReport::default();
    let mut groups = Vec::new();
    for (key, members) in associations {
        let mut related: Vec<&String> = members.iter().filter(|m| universe.contains(*m)).collect();
        if related.len() < min_size.max(2) {
            report.too_small.push(key.clone());
            continue;
        }
        if related.len() > max_size {
            related = related.choose_multiple(&mut rng, max_size).copied().collect();
            related.sort();
            report.truncated.push(key.clone());
        }
        let related_set: BTreeSet<&String> = related.iter().copied().collect();
        let candidates: Vec<&String> = pool.iter().copied().filter(|t| !related_set.contains(t)).collect();
        if candidates.len() < related.len() {
            report.universe_exhausted.push(key.clone());
            continue;
        }
        let mut unrelated: Vec<&String> = candidates.choose_multiple(&mut rng, related.len()).copied().collect();
        unrelated.sort();
        groups.push(ConceptGroup {
            group_id: key.clone(),
            related: related.into_iter().cloned().collect(),
            unrelated: unrelated.into_iter().cloned().collect(),
        });
    }
    (GroupDataset { name: String::new(), groups, provenance: String::new() }, report)
}

/// Keeps only tokens present in every embedding, then drops sets that fell
/// below two tokens. Used to restrict a dataset to the shared vocabulary.
pub fn filter_to_vocabulary(dataset: &GroupDataset, embeddings: &[&Embedding]) -> GroupDataset {
    let keep = |t: &String| embeddings.iter().all(|e| e.contains(t));
    let groups = dataset
        .groups
        .iter()
        .map(|g| ConceptGroup {
            group_id: g.group_id.clone(),
            related: g.related.iter().filter(|t| keep(t)).cloned().collect(),
            unrelated: g.unrelated.iter().filter(|t| keep(t)).cloned().collect(),
        })
        .filter(|g| g.related.len() >= 2 && g.unrelated.len() >= 2)
        .collect();
    GroupDataset { name: dataset.name.clone(), groups, provenance: dataset.provenance.clone() }
}

fn pair_key<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Normalized similarities of every distinct pair in a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedPairTable {
    values: HashMap<(String, String), f64>,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

impl NormalizedPairTable {
    /// Normalizes raw similarities: z-score with population statistics, then
    /// min-max into `[0, 1]`. If the spread is zero every value is 0.5.
    pub fn from_raw(raw: BTreeMap<(String, String), f64>) -> Self {
        let n = raw.len() as f64;
        let mean = kahan_sum(raw.values().copied()) / n;
        let var = kahan_sum(raw.values().map(|c| (c - mean) * (c - mean))) / n;
        let std_dev = var.sqrt();
        let min = raw.values().copied().fold(f64::INFINITY, f64::min);
        let max = raw.values().copied().fold(f64::NEG_INFINITY, f64::max);
        let values = if std_dev > 0.0 && max > min {
            let z_min = (min - mean) / std_dev;
            let z_max = (max - mean) / std_dev;
            let span = z_max - z_min;
            raw.into_iter().map(|(k, c)| (k, (((c - mean) / std_dev - z_min) / span).clamp(0.0, 1.0))).collect()
        } else {
            raw.into_keys().map(|k| (k, 0.5)).collect()
        };
        NormalizedPairTable { values, mean, std_dev, min, max }
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let (x, y) = pair_key(a, b);
        self.values.get(&(x.to_string(), y.to_string())).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Raw cosines of every distinct unordered pair inside any set.
pub fn raw_pair_cosines(dataset: &GroupDataset, embedding: &Embedding) -> Result<BTreeMap<(String, String), f64>, IntrinsicError> {
    let mut raw = BTreeMap::new();
    for g in &dataset.groups {
        for set in [&g.related, &g.unrelated] {
            for (i, a) in set.iter().enumerate() {
                for b in &set[i + 1..] {
                    let (x, y) = pair_key(a, b);
                    let key = (x.to_string(), y.to_string());
                    if raw.contains_key(&key) {
                        continue;
                    }
                    let va = embedding.vector(x).ok_or_else(|| IntrinsicError::UnknownToken(x.to_string()))?;
                    let vb = embedding.vector(y).ok_or_else(|| IntrinsicError::UnknownToken(y.to_string()))?;
                    raw.insert(key, cosine(va, vb)?);
                }
            }
        }
    }
    Ok(raw)
}

pub fn normalize_pairs(dataset: &GroupDataset, embedding: &Embedding) -> Result<NormalizedPairTable, IntrinsicError> {
    let raw = raw_pair_cosines(dataset, embedding)?;
    if raw.is_empty() {
        return Err(IntrinsicError::EmptyDataset);
    }
    Ok(NormalizedPairTable::from_raw(raw))
}

/// Mean normalized similarity over all pairs of `set`.
pub fn set_similarity<S: AsRef<str>>(set: &[S], table: &NormalizedPairTable) -> Result<f64, IntrinsicError> {
    if set.len() < 2 {
        return Err(IntrinsicError::SetTooSmall { group: String::new(), size: set.len() });
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, a) in set.iter().enumerate() {
        for b in &set[i + 1..] {
            let (a, b) = (a.as_ref(), b.as_ref());
            sum += table.get(a, b).ok_or_else(|| IntrinsicError::MissingPair(a.to_string(), b.to_string()))?;
            n += 1;
        }
    }
    Ok(sum / n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupScore {
    pub group_id: String,
    pub related: f64,
    pub unrelated: f64,
    /// `100 · (related − unrelated)`
    pub difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntrinsicResult {
    /// Mean group difference in percentage points.
    pub metric: f64,
    pub groups: Vec<GroupScore>,
    pub pair_count: usize,
    pub raw_mean: f64,
    pub raw_std_dev: f64,
}

impl IntrinsicResult {
    /// Per-group TSV with a header row.
    pub fn write_group_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "group_id\trelated\tunrelated\tdifference")?;
        for g in &self.groups {
            writeln!(out, "{}\t{:.6}\t{:.6}\t{:.6}", g.group_id, g.related, g.unrelated, g.difference)?;
        }
        Ok(())
    }
}

pub fn group_similarity_difference(dataset: &GroupDataset, embedding: &Embedding) -> Result<IntrinsicResult, IntrinsicError> {
    if dataset.groups.is_empty() {
        return Err(IntrinsicError::EmptyDataset);
    }
    for g in &dataset.groups {
        for set in [&g.related, &g.unrelated] {
            if set.len() < 2 {
                return Err(IntrinsicError::SetTooSmall { group: g.group_id.clone(), size: set.len() });
            }
        }
    }
    let table = normalize_pairs(dataset, embedding)?;
    let mut groups = Vec::with_capacity(dataset.groups.len());
    for g in &dataset.groups {
        let related = set_similarity(&g.related, &table)?;
        let unrelated = set_similarity(&g.unrelated, &table)?;
        groups.push(GroupScore { group_id: g.group_id.clone(), related, unrelated, difference: 100.0 * (related - unrelated) });
    }
    let metric = groups.iter().map(|g| g.difference).sum::<f64>() / groups.len() as f64;
    Ok(IntrinsicResult { metric, groups, pair_count: table.len(), raw_mean: table.mean, raw_std_dev: table.std_dev })
}
