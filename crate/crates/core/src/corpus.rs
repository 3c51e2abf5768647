//! PubTator ingestion and concept-token normalization.
//!
//! A PubTator export is a sequence of blank-line separated blocks:
//!
//! ```text
//! 123|t|Title text
//! 123|a|Abstract text
//! 123	0	7	MLN4924	Chemical	MESH:C539933
//! ```
//!
//! Offsets count Unicode scalar values over `title + " " + abstract`.
//! Every surviving annotation is rewritten into a single concept token such
//! as `Chemical_MESH_C539933`, and the remaining text is tokenized.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The six concept classes produced by the PubTator taggers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConceptType {
    Gene,
    Mutation,
    Disease,
    Chemical,
    CellLine,
    Species,
}

impl ConceptType {
    pub const ALL: [ConceptType; 6] = [
        ConceptType::Gene,
        ConceptType::Mutation,
        ConceptType::Disease,
        ConceptType::Chemical,
        ConceptType::CellLine,
        ConceptType::Species,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConceptType::Gene => "Gene",
            ConceptType::Mutation => "Mutation",
            ConceptType::Disease => "Disease",
            ConceptType::Chemical => "Chemical",
            ConceptType::CellLine => "CellLine",
            ConceptType::Species => "Species",
        }
    }

    /// Token prefix, e.g. `Gene_`.
    pub fn prefix(self) -> String {
        format!("{}_", self.as_str())
    }
}

impl fmt::Display for ConceptType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConceptType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "Gene" => ConceptType::Gene,
            // tmVar emits finer-grained mutation classes.
            "Mutation" | "DNAMutation" | "ProteinMutation" | "SNP" => ConceptType::Mutation,
            "Disease" => ConceptType::Disease,
            "Chemical" => ConceptType::Chemical,
            "CellLine" => ConceptType::CellLine,
            "Species" => ConceptType::Species,
            other => return Err(other.to_string()),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawDocument {
    pub doc_id: String,
    pub title: String,
    pub abstract_text: String,
    /// `title + " " + abstract_text`
    pub text: String,
}

impl RawDocument {
    pub fn new(doc_id: impl Into<String>, title: impl Into<String>, abstract_text: impl Into<String>) -> Self {
        let title = title.into();
        let abstract_text = abstract_text.into();
        let text = format!("{title} {abstract_text}");
        RawDocument { doc_id: doc_id.into(), title, abstract_text, text }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConceptAnnotation {
    pub doc_id: String,
    /// Inclusive start, in characters.
    pub start: usize,
    /// Exclusive end, in characters.
    pub end: usize,
    pub mention: String,
    pub concept_type: ConceptType,
    pub concept_id: String,
}

impl ConceptAnnotation {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn token(&self) -> String {
        make_concept_token(self.concept_type, &self.concept_id)
    }

    fn overlaps(&self, other: &ConceptAnnotation) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizedDocument {
    pub doc_id: String,
    pub tokens: Vec<String>,
    pub concept_token_count: usize,
}

/// Counters accumulated while parsing.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub documents: usize,
    pub blocks_skipped: usize,
    pub annotations_kept: usize,
    pub dropped_offset_mismatch: usize,
    pub dropped_missing_id: usize,
    pub dropped_unknown_type: usize,
    pub dropped_malformed: usize,
    pub multi_id_truncated: usize,
    pub other_lines_ignored: usize,
}

impl ParseReport {
    pub fn annotations_dropped(&self) -> usize {
        self.dropped_offset_mismatch + self.dropped_missing_id + self.dropped_unknown_type + self.dropped_malformed
    }

    /// `key=value` lines, one counter per line.
    pub fn write_kv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let rows: [(&str, usize); 10] = [
            ("documents", self.documents),
            ("blocks_skipped", self.blocks_skipped),
            ("annotations_kept", self.annotations_kept),
            ("annotations_dropped", self.annotations_dropped()),
            ("dropped_offset_mismatch", self.dropped_offset_mismatch),
            ("dropped_missing_id", self.dropped_missing_id),
            ("dropped_unknown_type", self.dropped_unknown_type),
            ("dropped_malformed", self.dropped_malformed),
            ("multi_id_truncated", self.multi_id_truncated),
            ("other_lines_ignored", self.other_lines_ignored),
        ];
        for (k, v) in rows {
            writeln!(out, "{k}={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: document {doc_id}: {message}")]
    Block { doc_id: String, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// What to do with a structurally broken block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorPolicy {
    Skip,
    Abort,
}

pub type ParsedDocument = (RawDocument, Vec<ConceptAnnotation>);

/// Streaming PubTator reader. Yields one item per block.
pub struct PubtatorReader<R> {
    lines: io::Lines<R>,
    line_no: usize,
    report: ParseReport,
    done: bool,
}

impl<R: BufRead> PubtatorReader<R> {
    pub fn new(reader: R) -> Self {
        PubtatorReader { lines: reader.lines(), line_no: 0, report: ParseReport::default(), done: false }
    }

    pub fn report(&self) -> &ParseReport {
        &self.report
    }

    pub fn into_report(self) -> ParseReport {
        self.report
    }

    /// Collects the next non-empty block as `(line_number, text)` pairs.
    fn next_block(&mut self) -> Result<Vec<(usize, String)>, CorpusError> {
        let mut block = Vec::new();
        loop {
            match self.lines.next() {
                None => {
                    self.done = true;
                    return Ok(block);
                }
                Some(line) => {
                    let line = line?;
                    self.line_no += 1;
                    let line = line.strip_suffix('\r').map(str::to_owned).unwrap_or(line);
                    if line.trim().is_empty() {
                        if block.is_empty() {
                            continue;
                        }
                        return Ok(block);
                    }
                    block.push((self.line_no, line));
                }
            }
        }
    }

    fn parse_block(&mut self, block: Vec<(usize, String)>) -> Result<ParsedDocument, CorpusError> {
        let mut iter = block.into_iter();
        let (title_line, title_raw) = iter.next().expect("non-empty block");
        let (doc_id, title) = split_text_line(&title_raw, 't').ok_or_else(|| CorpusError::Block {
            doc_id: title_raw.split('|').next().unwrap_or("").to_string(),
            line: title_line,
            message: "expected a `PMID|t|title` line".into(),
        })?;
        if doc_id.is_empty() {
            return Err(CorpusError::Block { doc_id, line: title_line, message: "empty PMID".into() });
        }
        let Some((abs_line, abs_raw)) = iter.next() else {
            return Err(CorpusError::Block {
                doc_id,
                line: title_line + 1,
                message: "missing `PMID|a|abstract` line".into(),
            });
        };
        let (abs_id, abstract_text) = split_text_line(&abs_raw, 'a').ok_or_else(|| CorpusError::Block {
            doc_id: doc_id.clone(),
            line: abs_line,
            message: "expected a `PMID|a|abstract` line".into(),
        })?;
        if abs_id != doc_id {
            return Err(CorpusError::Block {
                doc_id,
                line: abs_line,
                message: format!("PMID mismatch: abstract line has {abs_id}"),
            });
        }
        let doc = RawDocument::new(doc_id, title, abstract_text);
        let chars: Vec<char> = doc.text.chars().collect();

        let mut annotations = Vec::new();
        for (line, raw) in iter {
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields.len() == 4 {
                // relation lines (`PMID<TAB>CID<TAB>a<TAB>b`)
                self.report.other_lines_ignored += 1;
                continue;
            }
            if fields.len() < 5 {
                self.report.dropped_malformed += 1;
                continue;
            }
            if fields[0] != doc.doc_id {
                return Err(CorpusError::Block {
                    doc_id: doc.doc_id.clone(),
                    line,
                    message: format!("PMID mismatch: annotation line has {}", fields[0]),
                });
            }
            let (Ok(start), Ok(end)) = (fields[1].parse::<usize>(), fields[2].parse::<usize>()) else {
                self.report.dropped_malformed += 1;
                continue;
            };
            let mention = fields[3];
            let Ok(concept_type) = fields[4].parse::<ConceptType>() else {
                self.report.dropped_unknown_type += 1;
                continue;
            };
            let raw_id = fields.get(5).map(|s| s.trim()).unwrap_or("");
            let mut ids = raw_id.split(';').map(str::trim);
            let first = ids.next().unwrap_or("");
            if first.is_empty() || first == "-" {
                self.report.dropped_missing_id += 1;
                continue;
            }
            if ids.next().is_some() {
                self.report.multi_id_truncated += 1;
            }
            if !(start < end && end <= chars.len()) || chars[start..end].iter().copied().ne(mention.chars()) {
                self.report.dropped_offset_mismatch += 1;
                continue;
            }
            annotations.push(ConceptAnnotation {
                doc_id: doc.doc_id.clone(),
                start,
                end,
                mention: mention.to_string(),
                concept_type,
                concept_id: first.to_string(),
            });
        }
        annotations.sort_by(|a, b| (a.start, a.end).cmp(&(b.start, b.end)));
        self.report.annotations_kept += annotations.len();
        self.report.documents += 1;
        Ok((doc, annotations))
    }
}

impl<R: BufRead> Iterator for PubtatorReader<R> {
    type Item = Result<ParsedDocument, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let block = match self.next_block() {
            Ok(b) => b,
            Err(e) => {
                self.done = true;
                return Some(Err(e));
            }
        };
        if block.is_empty() {
            return None;
        }
        Some(self.parse_block(block))
    }
}

fn split_text_line(line: &str, kind: char) -> Option<(String, String)> {
    let (id, rest) = line.split_once('|')?;
    let (k, text) = rest.split_once('|')?;
    if k.len() != 1 || !k.starts_with(kind) {
        return None;
    }
    Some((id.to_string(), text.to_string()))
}

/// Parses a whole stream. Under [`ErrorPolicy::Skip`] broken blocks are
/// counted in `blocks_skipped`; under [`ErrorPolicy::Abort`] the first one
/// is returned.
pub fn parse_pubtator<R: BufRead>(reader: R, policy: ErrorPolicy) -> Result<(Vec<ParsedDocument>, ParseReport), CorpusError> {
    let mut parser = PubtatorReader::new(reader);
    let mut docs = Vec::new();
    while let Some(item) = parser.next() {
        match item {
            Ok(d) => docs.push(d),
            Err(CorpusError::Block { doc_id, line, message }) if policy == ErrorPolicy::Skip => {
                log::warn!("skipping block {doc_id} at line {line}: {message}");
                parser.report.blocks_skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok((docs, parser.into_report()))
}

/// Writes documents back in PubTator form.
pub fn write_pubtator<W: Write>(mut out: W, docs: &[ParsedDocument]) -> io::Result<()> {
    for (i, (doc, anns)) in docs.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        writeln!(out, "{}|t|{}", doc.doc_id, doc.title)?;
        writeln!(out, "{}|a|{}", doc.doc_id, doc.abstract_text)?;
        for a in anns {
            writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", a.doc_id, a.start, a.end, a.mention, a.concept_type, a.concept_id)?;
        }
    }
    Ok(())
}

/// `Disease` + `MESH:D008288` -> `Disease_MESH_D008288`.
pub fn make_concept_token(concept_type: ConceptType, concept_id: &str) -> String {
    let mut token = concept_type.prefix();
    token.extend(concept_id.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }));
    token
}

/// True for tokens carrying one of the six concept prefixes.
pub fn is_concept_token(token: &str) -> bool {
    concept_type_of(token).is_some()
}

pub fn concept_type_of(token: &str) -> Option<ConceptType> {
    ConceptType::ALL.into_iter().find(|t| {
        let name = t.as_str();
        token.len() > name.len() + 1 && token.starts_with(name) && token.as_bytes()[name.len()] == b'_'
    })
}

const PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', '(', ')', '[', ']', '{', '}', '"'];

/// Whitespace tokenizer that splits off punctuation and lowercases
/// everything except concept tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut piece_start = 0;
        for (i, c) in chunk.char_indices() {
            if PUNCT.contains(&c) {
                push_piece(&mut tokens, &chunk[piece_start..i]);
                tokens.push(c.to_string());
                piece_start = i + c.len_utf8();
            }
        }
        push_piece(&mut tokens, &chunk[piece_start..]);
    }
    tokens
}

fn push_piece(tokens: &mut Vec<String>, piece: &str) {
    if piece.is_empty() {
        return;
    }
    if is_concept_token(piece) {
        tokens.push(piece.to_string());
    } else {
        tokens.push(piece.to_lowercase());
    }
}

/// Longest span wins; ties go to the smaller start, then the smaller token.
/// Returns the survivors in start order.
pub fn resolve_overlaps(annotations: &[ConceptAnnotation]) -> Vec<&ConceptAnnotation> {
    let mut ranked: Vec<(&ConceptAnnotation, String)> = annotations.iter().map(|a| (a, a.token())).collect();
    ranked.sort_by(|(a, ta), (b, tb)| b.len().cmp(&a.len()).then(a.start.cmp(&b.start)).then(ta.cmp(tb)));
    let mut kept: Vec<&ConceptAnnotation> = Vec::new();
    for (a, _) in ranked {
        if !kept.iter().any(|k| k.overlaps(a)) {
            kept.push(a);
        }
    }
    kept.sort_by_key(|a| a.start);
    kept
}

/// Replaces every surviving span with its concept token and tokenizes the
/// rest. Concept tokens are emitted as standalone tokens even when the
/// mention is glued to surrounding characters.
pub fn normalize_document(doc: &RawDocument, annotations: &[ConceptAnnotation]) -> NormalizedDocument {
    let kept = resolve_overlaps(annotations);
    // char offset -> byte offset
    let mut byte_at: Vec<usize> = doc.text.char_indices().map(|(b, _)| b).collect();
    byte_at.push(doc.text.len());

    // Right-to-left so earlier offsets stay valid.
    let mut text = doc.text.clone();
    for a in kept.iter().rev() {
        let (s, e) = (byte_at[a.start], byte_at[a.end]);
        text.replace_range(s..e, &format!(" {} ", a.token()));
    }
    let tokens = tokenize(&text);
    NormalizedDocument { doc_id: doc.doc_id.clone(), concept_token_count: kept.len(), tokens }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = "123|t|MLN4924 treatment delayed SGK degradation\n\
123|a|ER-alpha expression in human cells.\n\
123\t0\t7\tMLN4924\tChemical\tMESH:C539933\n\
123\t42\t50\tER-alpha\tGene\t2099\n\
123\t65\t70\thuman\tSpecies\t9606\n";

    fn ann(start: usize, end: usize, t: ConceptType, id: &str, text: &str) -> ConceptAnnotation {
        ConceptAnnotation {
            doc_id: "1".into(),
            start,
            end,
            mention: text.chars().skip(start).take(end - start).collect(),
            concept_type: t,
            concept_id: id.into(),
        }
    }

    #[test]
    fn parses_chemical_annotation() {
        let (docs, report) = parse_pubtator(FIG2.as_bytes(), ErrorPolicy::Abort).unwrap();
        assert_eq!(docs.len(), 1);
        let (doc, anns) = &docs[0];
        assert_eq!(doc.doc_id, "123");
        assert_eq!(doc.text.chars().count(), doc.title.chars().count() + 1 + doc.abstract_text.chars().count());
        assert_eq!(anns.len(), 3);
        assert_eq!(anns[0].concept_type, ConceptType::Chemical);
        assert_eq!(anns[0].concept_id, "MESH:C539933");
        assert_eq!(report.annotations_kept, 3);
        assert_eq!(report.annotations_dropped(), 0);
    }

    #[test]
    fn block_without_annotations() {
        let input = "7|t|A title\n7|a|An abstract.\n";
        let (docs, _) = parse_pubtator(input.as_bytes(), ErrorPolicy::Abort).unwrap();
        assert_eq!(docs.len(), 1);
        assert!(docs[0].1.is_empty());
        assert_eq!(docs[0].0.text, "A title An abstract.");
    }

    #[test]
    fn mismatched_mention_is_dropped() {
        let input = "5|t|MLN4924 works\n5|a|x\n5\t0\t7\tMLN4925\tChemical\tMESH:C539933\n";
        let (docs, report) = parse_pubtator(input.as_bytes(), ErrorPolicy::Abort).unwrap();
        assert!(docs[0].1.is_empty());
        assert_eq!(report.dropped_offset_mismatch, 1);
    }

    #[test]
    fn missing_ids_and_multi_ids() {
        let input = "5|t|aspirin and tumor\n5|a|x\n\
5\t0\t7\taspirin\tChemical\t-\n\
5\t12\t17\ttumor\tDisease\tMESH:D009369;MESH:D000001\n\
5\t0\t7\taspirin\tChemical\n";
        let (docs, report) = parse_pubtator(input.as_bytes(), ErrorPolicy::Abort).unwrap();
        assert_eq!(report.dropped_missing_id, 2);
        assert_eq!(report.multi_id_truncated, 1);
        assert_eq!(docs[0].1.len(), 1);
        assert_eq!(docs[0].1[0].concept_id, "MESH:D009369");
    }

    #[test]
    fn offsets_count_characters_not_bytes() {
        let input = "9|t|β-catenin binds\n9|a|x\n9\t0\t9\tβ-catenin\tGene\t1499\n";
        let (docs, report) = parse_pubtator(input.as_bytes(), ErrorPolicy::Abort).unwrap();
        assert_eq!(report.annotations_kept, 1);
        let norm = normalize_document(&docs[0].0, &docs[0].1);
        assert_eq!(norm.tokens, vec!["Gene_1499", "binds", "x"]);
    }

    #[test]
    fn structural_errors() {
        let missing_abstract = "1|t|title\n1\t0\t1\tt\tGene\t1\n";
        let err = parse_pubtator(missing_abstract.as_bytes(), ErrorPolicy::Abort).unwrap_err();
        assert!(matches!(err, CorpusError::Block { line: 2, .. }), "{err}");

        let mismatch = "1|t|title\n2|a|abstract\n";
        let err = parse_pubtator(mismatch.as_bytes(), ErrorPolicy::Abort).unwrap_err();
        match err {
            CorpusError::Block { doc_id, line, .. } => {
                assert_eq!(doc_id, "1");
                assert_eq!(line, 2);
            }
            e => panic!("{e}"),
        }

        let truncated = "1|t|a\n1|a|b\n\n2|t|c\n";
        let err = parse_pubtator(truncated.as_bytes(), ErrorPolicy::Abort).unwrap_err();
        assert!(matches!(err, CorpusError::Block { line: 5, .. }), "{err}");

        let (docs, report) = parse_pubtator(truncated.as_bytes(), ErrorPolicy::Skip).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(report.blocks_skipped, 1);
    }

    #[test]
    fn concept_tokens() {
        assert_eq!(make_concept_token(ConceptType::Disease, "MESH:D008288"), "Disease_MESH_D008288");
        assert_eq!(make_concept_token(ConceptType::Gene, "2099"), "Gene_2099");
        assert_eq!(make_concept_token(ConceptType::Species, "9606"), "Species_9606");
        assert_eq!(make_concept_token(ConceptType::Mutation, "c|SUB|C|123|T"), "Mutation_c_SUB_C_123_T");
        assert!(is_concept_token("CellLine_CVCL_0031"));
        assert!(!is_concept_token("Gene_"));
        assert!(!is_concept_token("gene_2099"));
        assert!(!is_concept_token("Genes"));
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("ER-alpha expression was downregulated."), vec!["er-alpha", "expression", "was", "downregulated", "."]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Gene_2099 (ER)"), vec!["Gene_2099", "(", "er", ")"]);
        assert_eq!(tokenize("18F-FES-PET/CT"), vec!["18f-fes-pet/ct"]);
        assert_eq!(tokenize("\"quoted\";"), vec!["\"", "quoted", "\"", ";"]);
    }

    #[test]
    fn normalizes_fig2_fragment() {
        let text = "MLN4924 treatment delayed";
        let doc = RawDocument::new("1", text, "");
        let a = ann(0, 7, ConceptType::Chemical, "MESH:C539933", &doc.text);
        let norm = normalize_document(&doc, &[a]);
        assert_eq!(norm.tokens, vec!["Chemical_MESH_C539933", "treatment", "delayed"]);
        assert_eq!(norm.concept_token_count, 1);
    }

    #[test]
    fn no_annotations_is_plain_tokenization() {
        let doc = RawDocument::new("1", "Breast Cancer.", "ER (alpha) binds");
        assert_eq!(normalize_document(&doc, &[]).tokens, tokenize(&doc.text));
    }

    #[test]
    fn nested_span_loses_to_enclosing_span() {
        // "estrogen receptor alpha" (B) contains "estrogen receptor" (A)
        let doc = RawDocument::new("1", "estrogen receptor alpha levels", "");
        let a = ann(0, 17, ConceptType::Gene, "2099", &doc.text);
        let b = ann(0, 23, ConceptType::Gene, "2100", &doc.text);
        let norm = normalize_document(&doc, &[a, b]);
        assert_eq!(norm.tokens, vec!["Gene_2100", "levels"]);
        assert_eq!(norm.concept_token_count, 1);
    }

    #[test]
    fn equal_length_overlap_prefers_earlier_start() {
        let doc = RawDocument::new("1", "abcdef", "");
        let late = ann(2, 6, ConceptType::Gene, "1", &doc.text);
        let early = ann(0, 4, ConceptType::Gene, "2", &doc.text);
        let norm = normalize_document(&doc, &[late, early]);
        assert_eq!(norm.tokens, vec!["Gene_2", "ef"]);

        let same_a = ann(0, 4, ConceptType::Gene, "9", &doc.text);
        let same_b = ann(0, 4, ConceptType::Chemical, "9", &doc.text);
        let norm = normalize_document(&doc, &[same_a, same_b]);
        assert_eq!(norm.tokens, vec!["Chemical_9", "ef"]);
    }

    #[test]
    fn glued_mention_becomes_standalone() {
        let doc = RawDocument::new("1", "ER-positive tumors", "");
        let a = ann(0, 2, ConceptType::Gene, "2099", &doc.text);
        let norm = normalize_document(&doc, &[a]);
        assert_eq!(norm.tokens, vec!["Gene_2099", "-positive", "tumors"]);
    }
}
