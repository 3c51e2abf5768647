use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use conceptvec::corpus::{normalize_document, CorpusError, PubtatorReader};

use super::open;
use crate::manifest::{default_manifest_path, Outputs, RunManifest};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// PubTator export.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Normalized corpus: one document per line, tokens separated by spaces.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Parse report as `key=value` lines.
    #[arg(long)]
    pub report: PathBuf,
    /// Skip malformed blocks instead of aborting.
    #[arg(long)]
    pub skip_bad_blocks: bool,
    /// Defaults to `<output>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let mut manifest = RunManifest::new("normalize", None);
    manifest.input("pubtator", &args.input).config("skip_bad_blocks", args.skip_bad_blocks);
    let mut outputs = Outputs::new(manifest);

    let mut reader = PubtatorReader::new(open(&args.input)?);
    let mut corpus = outputs.create("corpus", &args.output)?;
    let (mut skipped, mut tokens, mut concepts) = (0usize, 0usize, 0usize);
    for item in reader.by_ref() {
        match item {
            Ok((doc, anns)) => {
                let norm = normalize_document(&doc, &anns);
                tokens += norm.tokens.len();
                concepts += norm.concept_token_count;
                writeln!(corpus, "{}", norm.tokens.join(" "))?;
            }
            Err(CorpusError::Block { doc_id, line, message }) if args.skip_bad_blocks => {
                log::warn!("skipping block {doc_id} at line {line}: {message}");
                skipped += 1;
            }
            Err(e) => return Err(e).with_context(|| format!("cannot parse {}", args.input.display())),
        }
    }
    corpus.flush()?;
    drop(corpus);
    let mut report = reader.into_report();
    report.blocks_skipped += skipped;
    outputs.write_with("report", &args.report, |w| report.write_kv(w))?;
    log::info!(
        "{} documents, {} tokens, {} concept tokens, {} annotations dropped",
        report.documents,
        tokens,
        concepts,
        report.annotations_dropped()
    );

    let results = serde_json::json!({ "report": report, "tokens": tokens, "concept_tokens": concepts });
    let path = args.manifest.unwrap_or_else(|| default_manifest_path(&args.output));
    outputs.finish(results, Some(&path))?;
    Ok(())
}
