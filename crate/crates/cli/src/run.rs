use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use html_lstm::extract::{IntegrateConfig, Mode};
use html_lstm::train::TrainConfig;

/// Keys handled here rather than by [`TrainConfig`].
const INTEGRATE_KEYS: [&str; 3] = ["integrate.mode", "integrate.threshold", "integrate.delimiter"];

/// Resolved settings of one invocation: file config, then flags.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub integrate: IntegrateConfig,
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "integrate.mode" => self.integrate.mode = v.parse()?,
            "integrate.threshold" => {
                self.integrate.threshold = v.parse().with_context(|| format!("integrate.threshold: bad value `{v}`"))?
            }
            "integrate.delimiter" => self.integrate.delimiter = unquote(v),
            k => self.train.set(k, v)?,
        }
        Ok(())
    }

    /// Flat `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("config line {}: expected key = value", no + 1);
            };
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut c = Self::default();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        c.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(0.0..=1.0).contains(&self.integrate.threshold) {
            bail!("integrate.threshold must be in [0, 1]");
        }
        Ok(())
    }

    pub fn snapshot(&self) -> String {
        let mut out = self.train.snapshot();
        let mode = match self.integrate.mode {
            Mode::Single => "single",
            Mode::Multi => "multi",
        };
        let _ = writeln!(out, "{} = {mode}", INTEGRATE_KEYS[0]);
        let _ = writeln!(out, "{} = {}", INTEGRATE_KEYS[1], self.integrate.threshold);
        let _ = writeln!(out, "{} = \"{}\"", INTEGRATE_KEYS[2], self.integrate.delimiter);
        out
    }
}

fn unquote(v: &str) -> String {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
        .to_string()
}

/// Output directory of a run; the resolved config is written first.
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    pub fn create(path: &Path, cfg: &RunConfig, command: &str) -> Result<Self> {
        std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        let text = format!("# html-lstm {command}\n{}", cfg.snapshot());
        std::fs::write(path.join("config.txt"), text)?;
        Ok(Self { path: path.to_path_buf() })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use html_lstm::train::CONFIG_KEYS;

    #[test]
    fn snapshot_round_trips() {
        let mut c = RunConfig::default();
        c.set("optim.epochs", "7").unwrap();
        c.set("integrate.mode", "multi").unwrap();
        c.set("integrate.delimiter", "\" | \"").unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&c.snapshot()).unwrap();
        assert_eq!(back.snapshot(), c.snapshot());
        assert_eq!(back.integrate.delimiter, " | ");
        assert_eq!(back.train.optim.epochs, 7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::default().set("optim.nope", "1").is_err());
        assert!(RunConfig::default().apply_text("seed 3").is_err());
    }

    #[test]
    fn every_key_appears_in_the_snapshot() {
        let snap = RunConfig::default().snapshot();
        for k in CONFIG_KEYS.iter().copied().chain(INTEGRATE_KEYS) {
            assert!(snap.lines().any(|l| l.starts_with(&format!("{k} ="))), "{k}");
        }
    }
}
