//! Training hyperparameters and the flat `key = value` config format.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cbow,
    #[serde(rename = "skipgram")]
    SkipGram,
    Glove,
    #[serde(rename = "fasttext")]
    FastTextVariant,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Cbow => "cbow",
            ModelKind::SkipGram => "skipgram",
            ModelKind::Glove => "glove",
            ModelKind::FastTextVariant => "fasttext",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "cbow" => Ok(ModelKind::Cbow),
            "skipgram" | "sg" => Ok(ModelKind::SkipGram),
            "glove" => Ok(ModelKind::Glove),
            "fasttext" | "fasttextvariant" => Ok(ModelKind::FastTextVariant),
            _ => Err(ConfigError::invalid("model", format!("unknown model `{s}`"))),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
}

impl ConfigError {
    pub fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid { field: field.to_string(), message: message.into() }
    }
}

/// Shared hyperparameters. Defaults are the published default column.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainingConfig {
    pub dimension: usize,
    pub window: usize,
    pub negatives: usize,
    pub subsample_threshold: f64,
    pub min_count: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub model: ModelKind,
    pub seed: u64,
    pub workers: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            dimension: 200,
            window: 20,
            negatives: 5,
            subsample_threshold: 1e-3,
            min_count: 5,
            learning_rate: 0.025,
            epochs: 10,
            model: ModelKind::Cbow,
            seed: 1,
            workers: 1,
        }
    }
}

impl TrainingConfig {
    /// Alternate values used in the hyperparameter sweep.
    pub const SWEEP_DIMENSIONS: [usize; 3] = [100, 200, 300];
    pub const SWEEP_WINDOWS: [usize; 3] = [5, 10, 20];
    pub const SWEEP_NEGATIVES: [usize; 3] = [2, 3, 5];
    pub const SWEEP_SUBSAMPLE: [f64; 3] = [1e-3, 1e-4, 1e-5];

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, field: &str, msg: &str| if ok { Ok(()) } else { Err(ConfigError::invalid(field, msg)) };
        check(self.dimension >= 1, "dimension", "dimension ≥ 1")?;
        check(self.window >= 1, "window", "window ≥ 1")?;
        check(self.negatives >= 1, "negatives", "negatives ≥ 1")?;
        check(self.subsample_threshold > 0.0, "subsample_threshold", "subsample_threshold > 0")?;
        check(self.min_count >= 1, "min_count", "min_count ≥ 1")?;
        check(self.learning_rate > 0.0 && self.learning_rate.is_finite(), "learning_rate", "learning_rate > 0")?;
        check(self.epochs >= 1, "epochs", "epochs ≥ 1")?;
        check(self.workers >= 1, "workers", "workers ≥ 1")?;
        Ok(())
    }

    /// True when every swept hyperparameter takes one of the sweep values.
    pub fn is_sweep_point(&self) -> bool {
        Self::SWEEP_DIMENSIONS.contains(&self.dimension)
            && Self::SWEEP_WINDOWS.contains(&self.window)
            && Self::SWEEP_NEGATIVES.contains(&self.negatives)
            && Self::SWEEP_SUBSAMPLE.contains(&self.subsample_threshold)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FastTextConfig {
    pub min_ngram: usize,
    pub max_ngram: usize,
    pub bucket_count: usize,
}

impl Default for FastTextConfig {
    fn default() -> Self {
        FastTextConfig { min_ngram: 2, max_ngram: 3, bucket_count: 2_000_000 }
    }
}

impl FastTextConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.min_ngram < 1 {
            return Err(ConfigError::invalid("min_ngram", "min_ngram ≥ 1"));
        }
        if self.max_ngram < self.min_ngram {
            return Err(ConfigError::invalid("max_ngram", "max_ngram ≥ min_ngram"));
        }
        if self.bucket_count < 1 {
            return Err(ConfigError::invalid("bucket_count", "bucket_count ≥ 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GloveConfig {
    pub x_max: f64,
    pub weight_alpha: f64,
    /// Initial AdaGrad step.
    pub initial_step: f64,
}

impl Default for GloveConfig {
    fn default() -> Self {
        GloveConfig { x_max: 100.0, weight_alpha: 0.75, initial_step: 0.05 }
    }
}

impl GloveConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.x_max > 0.0) {
            return Err(ConfigError::invalid("x_max", "x_max > 0"));
        }
        if !(self.weight_alpha > 0.0 && self.weight_alpha <= 1.0) {
            return Err(ConfigError::invalid("weight_alpha", "0 < weight_alpha ≤ 1"));
        }
        if !(self.initial_step > 0.0) {
            return Err(ConfigError::invalid("initial_step", "initial_step > 0"));
        }
        Ok(())
    }
}

/// All three config groups, as read from a `key = value` file.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FullConfig {
    pub training: TrainingConfig,
    pub fasttext: FastTextConfig,
    pub glove: GloveConfig,
}

impl FullConfig {
    /// Parses `key = value` lines. `#` starts a comment.
    pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, message: "expected `key = value`".into() })?;
            let (k, v) = (k.trim(), v.trim().trim_matches('"'));
            if k.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1, message: "empty key".into() });
            }
            map.insert(k.to_string(), v.to_string());
        }
        Ok(map)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::invalid(key, format!("cannot parse `{value}`")))
        }
        let t = &mut self.training;
        match key {
            "dimension" => t.dimension = num(key, value)?,
            "window" => t.window = num(key, value)?,
            "negatives" => t.negatives = num(key, value)?,
            "subsample_threshold" => t.subsample_threshold = num(key, value)?,
            "min_count" => t.min_count = num(key, value)?,
            "learning_rate" => t.learning_rate = num(key, value)?,
            "epochs" => t.epochs = num(key, value)?,
            "model" => t.model = value.parse()?,
            "seed" => t.seed = num(key, value)?,
            "workers" => t.workers = num(key, value)?,
            "min_ngram" => self.fasttext.min_ngram = num(key, value)?,
            "max_ngram" => self.fasttext.max_ngram = num(key, value)?,
            "bucket_count" => self.fasttext.bucket_count = num(key, value)?,
            "x_max" => self.glove.x_max = num(key, value)?,
            "weight_alpha" => self.glove.weight_alpha = num(key, value)?,
            "initial_step" => self.glove.initial_step = num(key, value)?,
            other => return Err(ConfigError::invalid(other, "unknown key")),
        }
        Ok(())
    }

    pub fn from_kv_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = FullConfig::default();
        for (k, v) in Self::parse_kv(text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.training.validate()?;
        self.fasttext.validate()?;
        self.glove.validate()
    }

    /// Every effective value as `key = value`, in a fixed order.
    pub fn to_kv_text(&self) -> String {
        let t = &self.training;
        let rows: Vec<(&str, String)> = vec![
            ("model", t.model.to_string()),
            ("dimension", t.dimension.to_string()),
            ("window", t.window.to_string()),
            ("negatives", t.negatives.to_string()),
            ("subsample_threshold", t.subsample_threshold.to_string()),
            ("min_count", t.min_count.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("epochs", t.epochs.to_string()),
            ("seed", t.seed.to_string()),
            ("workers", t.workers.to_string()),
            ("min_ngram", self.fasttext.min_ngram.to_string()),
            ("max_ngram", self.fasttext.max_ngram.to_string()),
            ("bucket_count", self.fasttext.bucket_count.to_string()),
            ("x_max", self.glove.x_max.to_string()),
            ("weight_alpha", self.glove.weight_alpha.to_string()),
            ("initial_step", self.glove.initial_step.to_string()),
        ];
        rows.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
