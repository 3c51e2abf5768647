use std::io::{BufRead, Write};
use std::path::PathBuf;

use anyhow::Context;
use conceptvec::train::{export, train, FullConfig};
use conceptvec::vocab::Vocabulary;

use super::open;
use crate::manifest::{default_manifest_path, Outputs, RunManifest};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Normalized corpus, one document per line.
    #[arg(long, short)]
    pub corpus: PathBuf,
    /// Embedding in word2vec text format.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Flat `key = value` file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// cbow, skipgram, fasttext or glove.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub dimension: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub subsample_threshold: Option<f64>,
    #[arg(long)]
    pub min_count: Option<u64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Lock-free parallel workers; 1 gives bit-reproducible output.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub min_ngram: Option<usize>,
    #[arg(long)]
    pub max_ngram: Option<usize>,
    #[arg(long)]
    pub bucket_count: Option<usize>,
    #[arg(long)]
    pub x_max: Option<f64>,
    #[arg(long)]
    pub weight_alpha: Option<f64>,
    #[arg(long)]
    pub initial_step: Option<f64>,
    /// Export concept tokens only.
    #[arg(long)]
    pub concept_only: bool,
    /// Per-epoch loss log; defaults to `<output>.loss.tsv`.
    #[arg(long)]
    pub loss_log: Option<PathBuf>,
    /// Defaults to `<output>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

impl Args {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        fn opt<T: ToString>(key: &'static str, v: &Option<T>) -> Option<(&'static str, String)> {
            v.as_ref().map(|v| (key, v.to_string()))
        }
        [
            opt("model", &self.model),
            opt("dimension", &self.dimension),
            opt("window", &self.window),
            opt("negatives", &self.negatives),
            opt("subsample_threshold", &self.subsample_threshold),
            opt("min_count", &self.min_count),
            opt("learning_rate", &self.learning_rate),
            opt("epochs", &self.epochs),
            opt("seed", &self.seed),
            opt("workers", &self.workers),
            opt("min_ngram", &self.min_ngram),
            opt("max_ngram", &self.max_ngram),
            opt("bucket_count", &self.bucket_count),
            opt("x_max", &self.x_max),
            opt("weight_alpha", &self.weight_alpha),
            opt("initial_step", &self.initial_step),
        ]
        .into_iter()
        .flatten()
        .collect()
    }
}

pub fn resolve_config(args: &Args) -> anyhow::Result<FullConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            FullConfig::from_kv_text(&text).with_context(|| format!("invalid config {}", path.display()))?
        }
        None => FullConfig::default(),
    };
    for (key, value) in args.overrides() {
        cfg.set(key, &value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let cfg = resolve_config(&args)?;
    let corpus: Vec<Vec<String>> = open(&args.corpus)?
        .lines()
        .map(|l| l.map(|l| l.split_whitespace().map(str::to_string).collect()))
        .collect::<Result<_, _>>()
        .with_context(|| format!("cannot read {}", args.corpus.display()))?;

    let mut manifest = RunManifest::new("train", Some(cfg.training.seed));
    manifest.input("corpus", &args.corpus);
    if let Some(c) = &args.config {
        manifest.input("config", c);
    }
    for (k, v) in FullConfig::parse_kv(&cfg.to_kv_text())? {
        manifest.config(&k, v);
    }
    manifest.config("concept_only", args.concept_only);
    let mut outputs = Outputs::new(manifest);

    let vocab = Vocabulary::build(&corpus, cfg.training.min_count)?;
    log::info!("vocabulary: {} types, {} tokens; training {}", vocab.len(), vocab.total_tokens(), cfg.training.model);
    let (matrix, report) = train(&corpus, &vocab, &cfg.training, &cfg.fasttext, &cfg.glove)?;
    let embedding = export(&matrix, &vocab, args.concept_only)?;

    outputs.write_with("embedding", &args.output, |w| embedding.write_text(w))?;
    let loss_path = args.loss_log.clone().unwrap_or_else(|| {
        let mut p = args.output.as_os_str().to_owned();
        p.push(".loss.tsv");
        PathBuf::from(p)
    });
    outputs.write_with("loss_log", &loss_path, |w| {
        writeln!(w, "epoch\tloss")?;
        for (i, loss) in report.epoch_losses.iter().enumerate() {
            writeln!(w, "{}\t{loss:.9e}", i + 1)?;
        }
        Ok(())
    })?;

    let results = serde_json::json!({
        "vocabulary_size": vocab.len(),
        "corpus_tokens": vocab.total_tokens(),
        "exported_vectors": embedding.len(),
        "epoch_losses": report.epoch_losses,
        "min_learning_rate": report.min_learning_rate,
    });
    let path = args.manifest.clone().unwrap_or_else(|| default_manifest_path(&args.output));
    outputs.finish(results, Some(&path))?;
    Ok(())
}
