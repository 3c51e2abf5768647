use std::io::BufRead;
use std::path::PathBuf;

use anyhow::Context;
use conceptvec::corpus::{is_concept_token, make_concept_token, ConceptType};
use conceptvec::embedding::coverage_report;

use super::{load_embedding, open};
use crate::manifest::{default_manifest_path, Outputs, RunManifest};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, short)]
    pub embedding: PathBuf,
    /// Reference list, one id or concept token per line.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Turn bare reference ids into concept tokens of this type, e.g. Gene.
    #[arg(long)]
    pub reference_type: Option<String>,
    /// Also write the report here as TSV.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Defaults to `<output>.manifest.json` when `--output` is given.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let emb = load_embedding(&args.embedding)?;
    let concept_type: Option<ConceptType> = args.reference_type.as_deref().map(str::parse).transpose().map_err(anyhow::Error::msg)?;
    let mut manifest = RunManifest::new("coverage", None);
    manifest.input("embedding", &args.embedding).config("reference_type", &args.reference_type);
    let mut reference = Vec::new();
    if let Some(path) = &args.reference {
        manifest.input("reference", path);
        for line in open(path)?.lines() {
            let line = line.with_context(|| format!("cannot read {}", path.display()))?;
            let id = line.trim();
            if id.is_empty() {
                continue;
            }
            reference.push(match concept_type {
                Some(t) if !is_concept_token(id) => make_concept_token(t, id),
                _ => id.to_string(),
            });
        }
    }
    let mut outputs = Outputs::new(manifest);
    let report = coverage_report(&emb, &reference);
    let mut text = Vec::new();
    report.write_tsv(&mut text)?;
    print!("{}", String::from_utf8_lossy(&text));
    if let Some(path) = &args.output {
        outputs.write_with("report", path, |w| std::io::Write::write_all(w, &text))?;
    }
    let manifest_path = args.manifest.clone().or_else(|| args.output.as_deref().map(default_manifest_path));
    outputs.finish(&report, manifest_path.as_deref())?;
    Ok(())
}
