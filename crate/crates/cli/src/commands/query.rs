use std::path::PathBuf;

use conceptvec::embedding::{cosine, nearest_neighbors, EmbeddingError};

use super::load_embedding;
use crate::manifest::{Outputs, RunManifest};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, short)]
    pub embedding: PathBuf,
    /// Query token.
    pub token: String,
    /// Print the cosine between `token` and this token instead.
    pub other: Option<String>,
    /// Number of neighbours.
    #[arg(long, short, default_value_t = 10)]
    pub k: usize,
    /// Only report neighbours with this prefix, e.g. `Gene_`.
    #[arg(long)]
    pub prefix: Option<String>,
    /// Write a run manifest here.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn unknown_hint(e: EmbeddingError) -> anyhow::Error {
    match e {
        EmbeddingError::UnknownToken { token, suggestions } if !suggestions.is_empty() => {
            anyhow::anyhow!("unknown token `{token}`; closest: {}", suggestions.join(", "))
        }
        e => e.into(),
    }
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let emb = load_embedding(&args.embedding)?;
    let mut manifest = RunManifest::new("query", None);
    manifest
        .input("embedding", &args.embedding)
        .config("token", &args.token)
        .config("other", &args.other)
        .config("k", args.k)
        .config("prefix", &args.prefix);
    let outputs = Outputs::new(manifest);

    let results = match &args.other {
        Some(other) => {
            let a = emb.lookup(&args.token).map_err(unknown_hint)?;
            let b = emb.lookup(other).map_err(unknown_hint)?;
            let c = cosine(a, b)?;
            println!("{c:.6}");
            serde_json::json!({ "cosine": c })
        }
        None => {
            let hits = nearest_neighbors(&emb, &args.token, args.k, args.prefix.as_deref()).map_err(unknown_hint)?;
            for (t, c) in &hits {
                println!("{t}\t{c:.6}");
            }
            serde_json::json!({ "neighbors": hits })
        }
    };
    outputs.finish(results, args.manifest.as_deref())?;
    Ok(())
}
