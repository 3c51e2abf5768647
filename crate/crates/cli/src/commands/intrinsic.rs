use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use conceptvec::corpus::is_concept_token;
use conceptvec::intrinsic::{
    build_groups, filter_to_vocabulary, group_similarity_difference, read_associations, GroupDataset, DEFAULT_MAX_SET,
    DEFAULT_MIN_SET,
};

use super::{load_embedding, open};
use crate::manifest::{default_manifest_path, Outputs, RunManifest};

#[derive(Debug, clap::Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["groups", "associations"])))]
pub struct Args {
    #[arg(long, short)]
    pub embedding: PathBuf,
    /// Concept groups, one JSON object per line.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// `key<TAB>concept` associations; groups are sampled from them.
    #[arg(long)]
    pub associations: Option<PathBuf>,
    /// Drop tokens missing from any of these embeddings as well.
    #[arg(long)]
    pub shared_with: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_SET)]
    pub max_set: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_SET)]
    pub min_set: usize,
    /// Seed for sampling groups from associations.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// JSON report.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Per-group scores as TSV.
    #[arg(long)]
    pub group_scores: Option<PathBuf>,
    /// Save the groups actually scored.
    #[arg(long)]
    pub groups_out: Option<PathBuf>,
    /// Defaults to `<output>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let emb = load_embedding(&args.embedding)?;
    let others = args.shared_with.iter().map(|p| load_embedding(p)).collect::<anyhow::Result<Vec<_>>>()?;

    let mut manifest = RunManifest::new("eval-intrinsic", Some(args.seed));
    manifest.input("embedding", &args.embedding);
    for (i, p) in args.shared_with.iter().enumerate() {
        manifest.input(&format!("shared_with_{i}"), p);
    }
    manifest.config("max_set", args.max_set).config("min_set", args.min_set);

    let mut build_report = None;
    let dataset = match (&args.groups, &args.associations) {
        (Some(path), _) => {
            manifest.input("groups", path);
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            GroupDataset::read_jsonl(open(path)?, name).with_context(|| format!("cannot read {}", path.display()))?
        }
        (None, Some(path)) => {
            manifest.input("associations", path);
            let assoc = read_associations(open(path)?).with_context(|| format!("cannot read {}", path.display()))?;
            let universe: BTreeSet<String> = emb
                .tokens()
                .iter()
                .filter(|t| is_concept_token(t) && others.iter().all(|o| o.contains(t)))
                .cloned()
                .collect();
            let (mut ds, report) = build_groups(&assoc, &universe, args.max_set, args.min_set, args.seed);
            ds.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            ds.provenance = path.display().to_string();
            build_report = Some(report);
            ds
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let mut all: Vec<&_> = vec![&emb];
    all.extend(others.iter());
    let dataset = filter_to_vocabulary(&dataset, &all);
    log::info!("{} groups after restricting to the vocabulary", dataset.groups.len());

    let mut outputs = Outputs::new(manifest);
    let result = group_similarity_difference(&dataset, &emb)?;
    println!("group_similarity_difference\t{:.6}", result.metric);

    let report = serde_json::json!({ "dataset": dataset.name, "result": result, "group_build": build_report });
    outputs.write_with("report", &args.output, |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)
    })?;
    if let Some(path) = &args.group_scores {
        outputs.write_with("group_scores", path, |w| result.write_group_tsv(w))?;
    }
    if let Some(path) = &args.groups_out {
        outputs.write_with("groups", path, |w| dataset.write_jsonl(w))?;
    }
    let path = args.manifest.clone().unwrap_or_else(|| default_manifest_path(&args.output));
    outputs.finish(serde_json::json!({ "metric": result.metric, "groups": result.groups.len() }), Some(&path))?;
    Ok(())
}
