use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Record written next to every run's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    /// Every effective parameter value.
    pub config: BTreeMap<String, Value>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub results: Value,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: Option<u64>) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            results: Value::Null,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn config(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.config.insert(key.to_string(), serde_json::to_value(value).expect("config values serialize"));
        self
    }

    pub fn input(&mut self, key: &str, path: &Path) -> &mut Self {
        self.inputs.insert(key.to_string(), path.display().to_string());
        self
    }
}

/// `<path>.manifest.json`
pub fn default_manifest_path(primary: &Path) -> PathBuf {
    let mut name = primary.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Output files of one run. Files created through it are deleted again
/// unless [`Outputs::finish`] completes.
pub struct Outputs {
    created: Vec<PathBuf>,
    manifest: RunManifest,
    started: Instant,
    done: bool,
}

impl Outputs {
    pub fn new(manifest: RunManifest) -> Self {
        Outputs { created: Vec::new(), manifest, started: Instant::now(), done: false }
    }

    pub fn create(&mut self, role: &str, path: &Path) -> anyhow::Result<BufWriter<File>> {
        let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        self.created.push(path.to_path_buf());
        self.manifest.outputs.insert(role.to_string(), path.display().to_string());
        Ok(BufWriter::new(file))
    }

    pub fn write_with(
        &mut self,
        role: &str,
        path: &Path,
        body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    ) -> anyhow::Result<()> {
        let mut w = self.create(role, path)?;
        body(&mut w).and_then(|_| w.flush()).with_context(|| format!("cannot write {}", path.display()))
    }

    /// Writes the manifest (if a path is given) and keeps every output.
    pub fn finish(mut self, results: impl Serialize, manifest_path: Option<&Path>) -> anyhow::Result<RunManifest> {
        self.manifest.results = serde_json::to_value(results)?;
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        if let Some(path) = manifest_path {
            self.manifest.outputs.insert("manifest".into(), path.display().to_string());
            let manifest = self.manifest.clone();
            self.write_with("manifest", path, |w| {
                serde_json::to_writer_pretty(&mut *w, &manifest)?;
                writeln!(w)
            })?;
        }
        self.done = true;
        Ok(self.manifest.clone())
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.done {
            return;
        }
        for path in &self.created {
            if std::fs::remove_file(path).is_ok() {
                log::warn!("removed partial output {}", path.display());
            }
        }
    }
}
