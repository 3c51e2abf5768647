use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use conceptvec::downstream::{read_ddi, run_ddi, DdiLabel};

use super::{load_embedding, open, record_hyper, MlpArgs};
use crate::manifest::{default_manifest_path, Outputs, RunManifest};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, short)]
    pub embedding: PathBuf,
    /// Training sentences, one JSON object per line.
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Append the two drug vectors to the sentence mean.
    #[arg(long)]
    pub augment_concepts: bool,
    /// First seed; runs use `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub runs: u64,
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
    anyhow::ensure!(args.runs >= 1, "runs ≥ 1");
    let hyper = args.mlp.hyper()?;
    let emb = load_embedding(&args.embedding)?;
    let train = read_ddi(open(&args.train)?).with_context(|| format!("cannot read {}", args.train.display()))?;
    let test = read_ddi(open(&args.test)?).with_context(|| format!("cannot read {}", args.test.display()))?;
    let seeds: Vec<u64> = (0..args.runs).map(|i| args.seed.wrapping_add(i)).collect();

    let mut manifest = RunManifest::new("eval-ddi", Some(args.seed));
    manifest
        .input("embedding", &args.embedding)
        .input("train", &args.train)
        .input("test", &args.test)
        .config("augment_concepts", args.augment_concepts)
        .config("seeds", &seeds);
    record_hyper(&mut manifest, &hyper);
    let mut outputs = Outputs::new(manifest);

    let report = run_ddi(&train, &test, &emb, &hyper, &seeds, args.augment_concepts)?;
    let micro = &report.mean_micro;
    println!("micro_precision\t{:.6}\nmicro_recall\t{:.6}\nmicro_f1\t{:.6}", micro.precision, micro.recall, micro.f1);
    println!("micro_f1_std\t{:.6}", report.micro_f1_std);
    for (label, f1) in DdiLabel::POSITIVE.iter().zip(report.mean_type_f1) {
        println!("{label}_f1\t{f1:.6}");
    }
    outputs.write_with("report", &args.output, |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)
    })?;
    let fingerprints: Vec<_> = report
        .per_seed
        .iter()
        .map(|r| serde_json::json!({
            "seed": r.seed,
            "split_fingerprint": format!("{:016x}", r.split_fingerprint),
            "init_fingerprint": format!("{:016x}", r.init_fingerprint),
        }))
        .collect();
    let results = serde_json::json!({
        "mean_micro": report.mean_micro,
        "micro_f1_std": report.micro_f1_std,
        "mean_type_f1": report.mean_type_f1,
        "runs": fingerprints,
    });
    let path = args.manifest.clone().unwrap_or_else(|| default_manifest_path(&args.output));
    outputs.finish(results, Some(&path))?;
    Ok(())
}
