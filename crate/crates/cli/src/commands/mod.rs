pub mod coverage;
pub mod ddi;
pub mod intrinsic;
pub mod normalize;
pub mod ppi;
pub mod query;
pub mod train;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::Context;
use conceptvec::downstream::MlpHyper;
use conceptvec::embedding::Embedding;

use crate::manifest::RunManifest;

pub fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

pub fn load_embedding(path: &Path) -> anyhow::Result<Embedding> {
    let emb = Embedding::load_text(path).with_context(|| format!("cannot load embedding {}", path.display()))?;
    log::info!("loaded {} vectors of dimension {} from {}", emb.len(), emb.dim(), path.display());
    Ok(emb)
}

/// Classifier settings shared by the downstream tasks.
#[derive(Debug, clap::Args)]
pub struct MlpArgs {
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = MlpHyper::default().hidden)]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = MlpHyper::default().batch_size)]
    pub batch_size: usize,
    #[arg(long = "mlp-learning-rate", default_value_t = MlpHyper::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = MlpHyper::default().momentum)]
    pub momentum: f64,
    #[arg(long, default_value_t = MlpHyper::default().max_epochs)]
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    #[arg(long, default_value_t = MlpHyper::default().patience)]
    pub patience: usize,
}

impl MlpArgs {
    pub fn hyper(&self) -> anyhow::Result<MlpHyper> {
        anyhow::ensure!(self.batch_size >= 1, "batch_size ≥ 1");
        anyhow::ensure!(self.max_epochs >= 1, "max_epochs ≥ 1");
        anyhow::ensure!(self.learning_rate > 0.0 && self.learning_rate.is_finite(), "mlp learning rate > 0");
        anyhow::ensure!((0.0..1.0).contains(&self.momentum), "momentum in [0, 1)");
        anyhow::ensure!(self.hidden.iter().all(|&h| h > 0), "hidden widths ≥ 1");
        Ok(MlpHyper {
            hidden: self.hidden.clone(),
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            max_epochs: self.max_epochs,
            patience: self.patience,
        })
    }
}

pub fn record_hyper(manifest: &mut RunManifest, hyper: &MlpHyper) {
    manifest
        .config("hidden", &hyper.hidden)
        .config("batch_size", hyper.batch_size)
        .config("mlp_learning_rate", hyper.learning_rate)
        .config("momentum", hyper.momentum)
        .config("max_epochs", hyper.max_epochs)
        .config("patience", hyper.patience);
}
