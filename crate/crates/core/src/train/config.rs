use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossConfig;
use crate::model::{DownwardCell, ModelConfig, SeedMode, Variant};
use crate::tensor::OptimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optim: OptimConfig,
    pub loss: LossConfig,
    pub model: ModelConfig,
    pub augment: bool,
    /// Per-pair swap probability of the row/column augmentation.
    pub augment_p: f64,
    /// Augmented variants generated per table and epoch, trained on next to
    /// the originals; copies identical to their table are dropped.
    pub augment_copies: usize,
    pub folds: usize,
    /// Fraction of sources held out by a single train/test split.
    pub test_fraction: f64,
    pub seed: u64,
    pub min_count: usize,
    pub tagger: String,
    /// Optional attribute-name synonym dictionary (TSV).
    pub synonyms: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optim: OptimConfig::default(),
            loss: LossConfig::default(),
            model: ModelConfig::default(),
            augment: false,
            augment_p: 0.5,
            augment_copies: 1,
            folds: 5,
            test_fraction: 0.2,
            seed: 0,
            min_count: 1,
            tagger: "rule".into(),
            synonyms: None,
        }
    }
}

/// Every key accepted by [`TrainConfig::set`], in snapshot order.
pub const CONFIG_KEYS: &[&str] = &[
    "optim.alpha",
    "optim.beta1",
    "optim.beta2",
    "optim.epsilon",
    "optim.halve_every",
    "optim.epochs",
    "optim.minibatch",
    "optim.dropout_p",
    "loss.gamma",
    "loss.alpha",
    "loss.epsilon",
    "loss.include_other",
    "model.d_word",
    "model.d_pos",
    "model.d_enc",
    "model.max_tokens",
    "model.d_hidden",
    "model.d_classifier",
    "model.clip_limit",
    "model.downward_cell",
    "model.seed_mode",
    "model.variant",
    "augment",
    "augment.p",
    "augment.copies",
    "folds",
    "test_fraction",
    "seed",
    "min_count",
    "tagger",
    "synonyms",
];

fn parse<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("bad value `{value}` for `{key}`"))),
    }
}

pub fn parse_downward_cell(value: &str) -> Result<DownwardCell> {
    match value {
        "perchild" | "per-child" => Ok(DownwardCell::PerChild),
        "summed" => Ok(DownwardCell::Summed),
        _ => Err(Error::Config(format!("unknown downward cell `{value}`"))),
    }
}

pub fn parse_seed_mode(value: &str) -> Result<SeedMode> {
    match value {
        "upward-root" => Ok(SeedMode::UpwardRoot),
        "zero" => Ok(SeedMode::Zero),
        _ => Err(Error::Config(format!("unknown seed mode `{value}`"))),
    }
}

pub fn parse_variant(value: &str) -> Result<Variant> {
    match value {
        "upward" | "upward-only" => Ok(Variant::UpwardOnly),
        "full" => Ok(Variant::Full),
        _ => Err(Error::Config(format!("unknown variant `{value}`"))),
    }
}

impl TrainConfig {
    /// Sets one flat `key = value` entry. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "optim.alpha" => self.optim.alpha = parse(key, v)?,
            "optim.beta1" => self.optim.beta1 = parse(key, v)?,
            "optim.beta2" => self.optim.beta2 = parse(key, v)?,
            "optim.epsilon" => self.optim.epsilon = parse(key, v)?,
            "optim.halve_every" => self.optim.halve_every = parse(key, v)?,
            "optim.epochs" => self.optim.epochs = parse(key, v)?,
            "optim.minibatch" => self.optim.minibatch = parse(key, v)?,
            "optim.dropout_p" => self.optim.dropout_p = parse(key, v)?,
            "loss.gamma" => self.loss.gamma = parse(key, v)?,
            "loss.alpha" => {
                self.loss.alpha = if v == "auto" {
                    None
                } else {
                    Some(v.split(',').map(|x| parse(key, x.trim())).collect::<Result<_>>()?)
                }
            }
            "loss.epsilon" => self.loss.epsilon = parse(key, v)?,
            "loss.include_other" => self.loss.include_other = parse_bool(key, v)?,
            "model.d_word" => self.model.encoder.d_word = parse(key, v)?,
            "model.d_pos" => self.model.encoder.d_pos = parse(key, v)?,
            "model.d_enc" => self.model.encoder.d_enc = parse(key, v)?,
            "model.max_tokens" => self.model.encoder.max_tokens = parse(key, v)?,
            "model.d_hidden" => self.model.d_hidden = parse(key, v)?,
            "model.d_classifier" => self.model.d_classifier = parse(key, v)?,
            "model.clip_limit" => self.model.clip_limit = parse(key, v)?,
            "model.downward_cell" => self.model.downward_cell = parse_downward_cell(v)?,
            "model.seed_mode" => self.model.seed_mode = parse_seed_mode(v)?,
            "model.variant" => self.model.variant = parse_variant(v)?,
            "augment" => self.augment = parse_bool(key, v)?,
            "augment.p" => self.augment_p = parse(key, v)?,
            "augment.copies" => self.augment_copies = parse(key, v)?,
            "folds" => self.folds = parse(key, v)?,
            "test_fraction" => self.test_fraction = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "min_count" => self.min_count = parse(key, v)?,
            "tagger" => self.tagger = v.to_string(),
            "synonyms" => self.synonyms = (!v.is_empty()).then(|| PathBuf::from(v)),
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Current value of a key, formatted as [`TrainConfig::set`] accepts it.
    pub fn get(&self, key: &str) -> Result<String> {
        let cell = |c: DownwardCell| match c {
            DownwardCell::PerChild => "perchild",
            DownwardCell::Summed => "summed",
        };
        Ok(match key {
            "optim.alpha" => self.optim.alpha.to_string(),
            "optim.beta1" => self.optim.beta1.to_string(),
            "optim.beta2" => self.optim.beta2.to_string(),
            "optim.epsilon" => self.optim.epsilon.to_string(),
            "optim.halve_every" => self.optim.halve_every.to_string(),
            "optim.epochs" => self.optim.epochs.to_string(),
            "optim.minibatch" => self.optim.minibatch.to_string(),
            "optim.dropout_p" => self.optim.dropout_p.to_string(),
            "loss.gamma" => self.loss.gamma.to_string(),
            "loss.alpha" => match &self.loss.alpha {
                None => "auto".into(),
                Some(a) => a.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            },
            "loss.epsilon" => self.loss.epsilon.to_string(),
            "loss.include_other" => self.loss.include_other.to_string(),
            "model.d_word" => self.model.encoder.d_word.to_string(),
            "model.d_pos" => self.model.encoder.d_pos.to_string(),
            "model.d_enc" => self.model.encoder.d_enc.to_string(),
            "model.max_tokens" => self.model.encoder.max_tokens.to_string(),
            "model.d_hidden" => self.model.d_hidden.to_string(),
            "model.d_classifier" => self.model.d_classifier.to_string(),
            "model.clip_limit" => self.model.clip_limit.to_string(),
            "model.downward_cell" => cell(self.model.downward_cell).into(),
            "model.seed_mode" => match self.model.seed_mode {
                SeedMode::UpwardRoot => "upward-root".into(),
                SeedMode::Zero => "zero".into(),
            },
            "model.variant" => match self.model.variant {
                Variant::UpwardOnly => "upward".into(),
                Variant::Full => "full".into(),
            },
            "augment" => self.augment.to_string(),
            "augment.p" => self.augment_p.to_string(),
            "augment.copies" => self.augment_copies.to_string(),
            "folds" => self.folds.to_string(),
            "test_fraction" => self.test_fraction.to_string(),
            "seed" => self.seed.to_string(),
            "min_count" => self.min_count.to_string(),
            "tagger" => self.tagger.clone(),
            "synonyms" => self
                .synonyms
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        })
    }

    /// Applies a flat `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Fully resolved `key = value` listing of every field.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        for k in CONFIG_KEYS {
            let _ = writeln!(out, "{k} = {}", self.get(k).expect("listed keys are known"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.optim.validate()?;
        self.loss.validate()?;
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be >= 2, got {}", self.folds)));
        }
        if self.model.clip_limit < 1 {
            return Err(Error::Config("clip_limit must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.augment_p) {
            return Err(Error::Config(format!("augment.p {} not in [0, 1]", self.augment_p)));
        }
        if self.augment_copies == 0 {
            return Err(Error::Config("augment.copies must be >= 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!("test_fraction {} not in (0, 1)", self.test_fraction)));
        }
        let e = &self.model.encoder;
        if e.d_word == 0 || e.d_pos == 0 || e.d_enc == 0 || e.max_tokens == 0 || self.model.d_hidden == 0 || self.model.d_classifier == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        Ok(())
    }
}
