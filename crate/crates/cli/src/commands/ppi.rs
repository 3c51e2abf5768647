use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use conceptvec::downstream::{read_pairs, run_ppi, SplitSpec};

use super::{load_embedding, open, record_hyper, MlpArgs};
use crate::manifest::{default_manifest_path, Outputs, RunManifest};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, short)]
    pub embedding: PathBuf,
    /// `protein_a<TAB>protein_b<TAB>0|1` lines.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.63, 0.07, 0.30])]
    pub split: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub mlp: MlpArgs,
    /// JSON report.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Defaults to `<output>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let hyper = args.mlp.hyper()?;
    let split = SplitSpec { train: args.split[0], validation: args.split[1], test: args.split[2] };
    split.validate()?;
    let emb = load_embedding(&args.embedding)?;
    let pairs = read_pairs(open(&args.pairs)?).with_context(|| format!("cannot read {}", args.pairs.display()))?;

    let mut manifest = RunManifest::new("eval-ppi", Some(args.seed));
    manifest.input("embedding", &args.embedding).input("pairs", &args.pairs).config("split", &args.split);
    record_hyper(&mut manifest, &hyper);
    let mut outputs = Outputs::new(manifest);

    let report = run_ppi(&pairs, &emb, &split, &hyper, args.seed)?;
    let m = &report.metrics;
    match m.auc {
        Some(auc) => println!("auc\t{auc:.6}"),
        None => println!("auc\tundefined"),
    }
    println!("precision\t{:.6}\nrecall\t{:.6}\nf1\t{:.6}", m.precision, m.recall, m.f1);
    if report.dropped > 0 {
        log::warn!("{} pairs dropped for tokens missing from the embedding", report.dropped);
    }
    outputs.write_with("report", &args.output, |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)
    })?;
    let path = args.manifest.clone().unwrap_or_else(|| default_manifest_path(&args.output));
    let results = serde_json::json!({
        "metrics": report.metrics,
        "split_fingerprint": format!("{:016x}", report.split_fingerprint),
        "init_fingerprint": format!("{:016x}", report.init_fingerprint),
        "dropped": report.dropped,
    });
    outputs.finish(results, Some(&path))?;
    Ok(())
}
