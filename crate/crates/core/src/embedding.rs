//! Embedding persistence (word2vec text format) and queries.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{concept_type_of, tokenize, ConceptType};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("duplicate token `{token}` at line {line}")]
    DuplicateToken { token: String, line: usize },
    #[error("vector dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("embedding has no non-zero vector")]
    AllZero,
    #[error("non-finite value in vector of `{0}`")]
    NonFinite(String),
    #[error("unknown token `{token}`; closest: {}", suggestions.join(", "))]
    UnknownToken { token: String, suggestions: Vec<String> },
    #[error("none of the {0} name tokens are in the vocabulary")]
    NoKnownTokens(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Token vectors, stored row-major in single precision.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f32>,
    dim: usize,
}

impl Embedding {
    pub fn new(tokens: Vec<String>, vectors: Vec<f32>, dim: usize) -> Result<Self, EmbeddingError> {
        if vectors.len() != tokens.len() * dim {
            return Err(EmbeddingError::DimensionMismatch { expected: tokens.len() * dim, actual: vectors.len() });
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(EmbeddingError::DuplicateToken { token: t.clone(), line: i + 2 });
            }
        }
        if let Some(i) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(tokens[i / dim.max(1)].clone()));
        }
        if !vectors.iter().any(|&v| v != 0.0) {
            return Err(EmbeddingError::AllZero);
        }
        Ok(Embedding { tokens, index, vectors, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector(&self, token: &str) -> Option<&[f32]> {
        self.index_of(token).map(|i| self.row(i))
    }

    /// The same tokens with every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f32) -> Self {
        let mut out = self.clone();
        out.vectors.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// Vector for `token`, or an [`EmbeddingError::UnknownToken`] carrying
    /// the closest vocabulary strings.
    pub fn lookup(&self, token: &str) -> Result<&[f32], EmbeddingError> {
        self.vector(token).ok_or_else(|| EmbeddingError::UnknownToken {
            token: token.to_string(),
            suggestions: self.closest_tokens(token, 5),
        })
    }

    /// Vocabulary strings nearest to `token` by edit distance.
    pub fn closest_tokens(&self, token: &str, n: usize) -> Vec<String> {
        let mut scored: Vec<(usize, &String)> =
            self.tokens.iter().map(|t| (strsim::levenshtein(token, t), t)).collect();
        scored.sort();
        scored.into_iter().take(n).map(|(_, t)| t.clone()).collect()
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{} {}", self.tokens.len(), self.dim)?;
        for (i, t) in self.tokens.iter().enumerate() {
            out.write_all(t.as_bytes())?;
            for v in self.row(i) {
                // nine significant digits round-trip any f32 exactly
                write!(out, " {v:.8e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Reads the word2vec text format, validating the header against the
    /// rows and every row's arity.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or(EmbeddingError::Format { line: 1, message: "empty file".into() })??;
        let mut parts = header.split_whitespace();
        let (count, dim) = match (parts.next(), parts.next(), parts.next()) {
            (Some(c), Some(d), None) => match (c.parse::<usize>(), d.parse::<usize>()) {
                (Ok(c), Ok(d)) if d > 0 => (c, d),
                _ => return Err(EmbeddingError::Format { line: 1, message: format!("bad header `{header}`") }),
            },
            _ => return Err(EmbeddingError::Format { line: 1, message: "expected `<count> <dim>` header".into() }),
        };
        let mut tokens = Vec::with_capacity(count);
        let mut seen = HashSet::with_capacity(count);
        let mut vectors = Vec::with_capacity(count * dim);
        for row in 0..count {
            let line_no = row + 2;
            let line = lines
                .next()
                .ok_or_else(|| EmbeddingError::Format { line: line_no, message: format!("expected {count} rows, found {row}") })??;
            let mut fields = line.split_whitespace();
            let token = fields.next().ok_or(EmbeddingError::Format { line: line_no, message: "empty row".into() })?;
            let before = vectors.len();
            for f in fields {
                let v: f32 = f
                    .parse()
                    .map_err(|_| EmbeddingError::Format { line: line_no, message: format!("bad number `{f}`") })?;
                if !v.is_finite() {
                    return Err(EmbeddingError::Format { line: line_no, message: format!("non-finite value `{f}`") });
                }
                vectors.push(v);
            }
            if vectors.len() - before != dim {
                return Err(EmbeddingError::Format {
                    line: line_no,
                    message: format!("expected {dim} values, found {}", vectors.len() - before),
                });
            }
            if !seen.insert(token.to_string()) {
                return Err(EmbeddingError::DuplicateToken { token: token.to_string(), line: line_no });
            }
            tokens.push(token.to_string());
        }
        for (extra, line) in lines.enumerate() {
            if !line?.trim().is_empty() {
                return Err(EmbeddingError::Format {
                    line: count + 2 + extra,
                    message: format!("more rows than the header's {count}"),
                });
            }
        }
        Embedding::new(tokens, vectors, dim)
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_text(&mut w)?;
        w.flush()
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        Self::read_text(BufReader::new(File::open(path)?))
    }
}

/// Cosine similarity in double precision.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::DimensionMismatch { expected: u.len(), actual: v.len() });
    }
    let (mut uv, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok((uv / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0))
}

/// The `k` most cosine-similar tokens to `token`, excluding itself.
/// `prefix` keeps only tokens starting with it. Ties go to the smaller
/// token. Zero vectors are never returned.
pub fn nearest_neighbors(
    embedding: &Embedding,
    token: &str,
    k: usize,
    prefix: Option<&str>,
) -> Result<Vec<(String, f64)>, EmbeddingError> {
    let query = embedding.lookup(token)?;
    let mut scored = Vec::new();
    for (i, t) in embedding.tokens().iter().enumerate() {
        if t == token || prefix.is_some_and(|p| !t.starts_with(p)) {
            continue;
        }
        match cosine(query, embedding.row(i)) {
            Ok(c) => scored.push((t.clone(), c)),
            Err(EmbeddingError::ZeroVector) if embedding.row(i).iter().all(|&v| v == 0.0) => continue,
            Err(e) => return Err(e),
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

/// Mean word vector over a concept name. Returns the vector and the number
/// of name tokens that were out of vocabulary.
pub fn avg_word_vector(concept_name: &str, words: &Embedding) -> Result<(Vec<f32>, usize), EmbeddingError> {
    let name_tokens = tokenize(concept_name);
    let mut acc = vec![0.0f64; words.dim()];
    let (mut known, mut oov) = (0usize, 0usize);
    for t in &name_tokens {
        match words.vector(t) {
            Some(v) => {
                acc.iter_mut().zip(v).for_each(|(a, &x)| *a += x as f64);
                known += 1;
            }
            None => oov += 1,
        }
    }
    if known == 0 {
        return Err(EmbeddingError::NoKnownTokens(name_tokens.len()));
    }
    Ok((acc.into_iter().map(|a| (a / known as f64) as f32).collect(), oov))
}

/// Builds a concept-token embedding from concept names. Concepts whose names
/// have no in-vocabulary word are left out and returned separately.
pub fn avg_word_embedding<'a, I>(names: I, words: &Embedding) -> Result<(Embedding, Vec<String>), EmbeddingError>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let (mut tokens, mut vectors, mut missing) = (Vec::new(), Vec::new(), Vec::new());
    for (concept, name) in names {
        match avg_word_vector(name, words) {
            Ok((v, _)) => {
                tokens.push(concept.to_string());
                vectors.extend(v);
            }
            Err(EmbeddingError::NoKnownTokens(_)) => missing.push(concept.to_string()),
            Err(e) => return Err(e),
        }
    }
    Ok((Embedding::new(tokens, vectors, words.dim())?, missing))
}

/// Concept counts per type and overlap with a reference id list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    /// Every concept type, including those with zero tokens.
    pub per_type: BTreeMap<String, usize>,
    /// Tokens without a concept prefix.
    pub non_concept: usize,
    pub reference_size: usize,
    pub intersection: usize,
    /// `|reference ∪ embedding concept tokens|`
    pub union: usize,
}

impl CoverageReport {
    /// Share of the reference list found in the embedding; 0 for an empty
    /// list.
    pub fn fraction(&self) -> f64 {
        if self.reference_size == 0 {
            0.0
        } else {
            self.intersection as f64 / self.reference_size as f64
        }
    }

    /// `type<TAB>count` lines followed by summary keys.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (t, c) in &self.per_type {
            writeln!(out, "{t}\t{c}")?;
        }
        writeln!(out, "non_concept\t{}", self.non_concept)?;
        writeln!(out, "reference_size\t{}", self.reference_size)?;
        writeln!(out, "intersection\t{}", self.intersection)?;
        writeln!(out, "union\t{}", self.union)?;
        writeln!(out, "fraction\t{:.6}", self.fraction())
    }
}

pub fn coverage_report<S: AsRef<str>>(embedding: &Embedding, reference_ids: &[S]) -> CoverageReport {
    let mut per_type: BTreeMap<String, usize> = ConceptType::ALL.iter().map(|t| (t.as_str().to_string(), 0)).collect();
    let mut non_concept = 0;
    let mut concepts: HashSet<&str> = HashSet::new();
    for t in embedding.tokens() {
        match concept_type_of(t) {
            Some(ct) => {
                *per_type.get_mut(ct.as_str()).expect("all types present") += 1;
                concepts.insert(t);
            }
            None => non_concept += 1,
        }
    }
    let reference: HashSet<&str> = reference_ids.iter().map(AsRef::as_ref).collect();
    let intersection = reference.iter().filter(|r| embedding.contains(r)).count();
    let union = concepts.union(&reference).count();
    CoverageReport { per_type, non_concept, reference_size: reference.len(), intersection, union }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(rows: &[(&str, &[f32])]) -> Embedding {
        let dim = rows[0].1.len();
        Embedding::new(
            rows.iter().map(|(t, _)| t.to_string()).collect(),
            rows.iter().flat_map(|(_, v)| v.iter().copied()).collect(),
            dim,
        )
        .unwrap()
    }

    #[test]
    fn cosine_cases() {
        assert!((cosine(&[3.0, -1.0], &[3.0, -1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(EmbeddingError::ZeroVector)));
        assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let e = emb(&[("Gene_1", &[0.1, -2.5e-7, 3.0]), ("word", &[1.0 / 3.0, 0.0, -7.25])]);
        let mut buf = Vec::new();
        e.write_text(&mut buf).unwrap();
        let back = Embedding::read_text(buf.as_slice()).unwrap();
        assert_eq!(back, e);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("2 3\n"));
    }

    #[test]
    fn malformed_files_name_the_line() {
        let line_of = |text: &str| match Embedding::read_text(text.as_bytes()) {
            Err(EmbeddingError::Format { line, .. }) | Err(EmbeddingError::DuplicateToken { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(line_of("2 3\na 1 2 3\n"), 3);
        assert_eq!(line_of("2 3\na 1 2 3\nb 1 2\n"), 3);
        assert_eq!(line_of("1 2\na 1 NaN\n"), 2);
        assert_eq!(line_of("2 1\na 1\na 2\n"), 3);
        assert_eq!(line_of("1 1\na 1\nb 2\n"), 3);
        assert_eq!(line_of("x 1\n"), 1);
        assert_eq!(line_of("1 1\na one\n"), 2);
    }

    #[test]
    fn rejects_degenerate_embeddings() {
        assert!(matches!(Embedding::new(vec!["a".into()], vec![0.0, 0.0], 2), Err(EmbeddingError::AllZero)));
        assert!(Embedding::new(vec!["a".into(), "a".into()], vec![1.0, 1.0], 1).is_err());
        assert!(Embedding::new(vec!["a".into()], vec![f32::INFINITY], 1).is_err());
    }

    #[test]
    fn neighbors_rank_and_filter() {
        let e = emb(&[
            ("Gene_1", &[1.0, 0.0]),
            ("Gene_2", &[1.0, 1.0]),
            ("Disease_D1", &[1.0, 0.1]),
            ("Gene_3", &[-1.0, 0.0]),
            ("Gene_4", &[2.0, 2.0]),
        ]);
        let nn = nearest_neighbors(&e, "Gene_1", 10, None).unwrap();
        let names: Vec<&str> = nn.iter().map(|(t, _)| t.as_str()).collect();
        // Gene_2 and Gene_4 tie; ascending token breaks the tie
        assert_eq!(names, vec!["Disease_D1", "Gene_2", "Gene_4", "Gene_3"]);
        let genes = nearest_neighbors(&e, "Gene_1", 2, Some("Gene_")).unwrap();
        assert_eq!(genes.iter().map(|(t, _)| t.as_str()).collect::<Vec<_>>(), vec!["Gene_2", "Gene_4"]);
        match nearest_neighbors(&e, "Gene_5", 3, None) {
            Err(EmbeddingError::UnknownToken { suggestions, .. }) => assert!(suggestions.contains(&"Gene_1".to_string())),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn averaged_names() {
        let words = emb(&[("torsin", &[1.0, 0.0]), ("family", &[0.0, 1.0]), ("a", &[3.0, 3.0])]);
        let (v, oov) = avg_word_vector("torsin family", &words).unwrap();
        assert_eq!(v, vec![0.5, 0.5]);
        assert_eq!(oov, 0);
        let (v, _) = avg_word_vector("Torsin", &words).unwrap();
        assert_eq!(v, words.vector("torsin").unwrap());
        let (_, oov) = avg_word_vector("torsin family 3 member A", &words).unwrap();
        assert_eq!(oov, 2);
        assert!(matches!(avg_word_vector("unknown words", &words), Err(EmbeddingError::NoKnownTokens(2))));

        let (concepts, missing) =
            avg_word_embedding([("Gene_64222", "torsin family 3 member A"), ("Gene_9", "nothing")], &words).unwrap();
        assert_eq!(concepts.tokens(), &["Gene_64222".to_string()]);
        assert_eq!(missing, vec!["Gene_9".to_string()]);
    }

    #[test]
    fn coverage_counts() {
        let e = emb(&[("Gene_1", &[1.0]), ("Gene_2", &[1.0]), ("Gene_3", &[1.0]), ("Species_9606", &[1.0]), ("the", &[1.0])]);
        let r = coverage_report(&e, &["Gene_2", "Gene_3", "Gene_4", "Gene_5"]);
        assert_eq!(r.per_type["Gene"], 3);
        assert_eq!(r.per_type["Species"], 1);
        assert_eq!(r.per_type["Disease"], 0);
        assert_eq!(r.non_concept, 1);
        assert_eq!(r.intersection, 2);
        assert_eq!(r.fraction(), 0.5);
        assert_eq!(r.union, 6);
        let empty = coverage_report::<&str>(&e, &[]);
        assert_eq!(empty.intersection, 0);
        assert_eq!(empty.fraction(), 0.0);
    }
}
