//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! train_corpus = data/train.conll
//! local_hidden = 300,200,100
//! windows = 1,2,4,all
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::corpus::{DistractorMode, SynthSpec};
use crate::error::{Error, Result};
use crate::model::{Ablation, ContextWindow, ModelConfig};
use crate::train::Hyperparams;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train_corpus: Option<PathBuf>,
    pub eval_corpus: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub model: ModelConfig,
    pub hp: Hyperparams,
    pub ablation: Ablation,
    /// Context windows visited by a sweep.
    pub windows: Vec<ContextWindow>,
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train_corpus: None,
            eval_corpus: None,
            embeddings: None,
            checkpoint: None,
            report: None,
            model: ModelConfig::default(),
            hp: Hyperparams::default(),
            ablation: Ablation::Full,
            windows: vec![
                ContextWindow::Words(1),
                ContextWindow::Words(2),
                ContextWindow::Words(4),
                ContextWindow::Words(8),
                ContextWindow::All,
            ],
            synth: SynthSpec::default(),
        }
    }
}

/// Every accepted key, in [`RunConfig::to_text`] order.
pub const KEYS: &[&str] = &[
    "train_corpus",
    "eval_corpus",
    "embeddings",
    "checkpoint",
    "report",
    "embedding_dim",
    "zp_hidden",
    "local_hidden",
    "global_hidden",
    "context_window",
    "zp_combine",
    "lr",
    "init_range",
    "epochs",
    "seed",
    "shuffle",
    "fine_tune_embeddings",
    "ablation",
    "windows",
    "n_docs",
    "sentences_per_doc",
    "vocab_size",
    "distractor_mode",
];

/// Upper bound on any layer width, keeping a typo from allocating gigabytes.
pub const MAX_WIDTH: usize = 4096;

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
}

fn width(key: &str, v: &str) -> Result<usize> {
    let n: usize = num(key, v)?;
    if n == 0 || n > MAX_WIDTH {
        return Err(Error::Config(format!("{key} must be in 1..={MAX_WIDTH}, got {n}")));
    }
    Ok(n)
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got `{v}`"))),
    }
}

fn path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", i + 1)));
            }
            seen.push(key);
            cfg.set(key, value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, e.config_message())))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets one key; used for both file lines and command-line overrides.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "train_corpus" => self.train_corpus = path(v),
            "eval_corpus" => self.eval_corpus = path(v),
            "embeddings" => self.embeddings = path(v),
            "checkpoint" => self.checkpoint = path(v),
            "report" => self.report = path(v),
            "embedding_dim" => self.model.embedding_dim = width(key, v)?,
            "zp_hidden" => self.model.zp_hidden = width(key, v)?,
            "local_hidden" => {
                let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                let [a, b, c] = parts[..] else {
                    return Err(Error::Config(format!("local_hidden needs three widths, got `{v}`")));
                };
                self.model.local_hidden = [width(key, a)?, width(key, b)?, width(key, c)?];
            }
            "global_hidden" => self.model.global_hidden = width(key, v)?,
            "context_window" => self.model.context_window = v.parse()?,
            "zp_combine" => self.model.zp_combine = v.parse()?,
            "lr" => self.hp.lr = num(key, v)?,
            "init_range" => self.hp.init_range = num(key, v)?,
            "epochs" => self.hp.epochs = num(key, v)?,
            "seed" => self.hp.seed = num(key, v)?,
            "shuffle" => self.hp.shuffle = boolean(key, v)?,
            "fine_tune_embeddings" => self.hp.fine_tune_embeddings = boolean(key, v)?,
            "ablation" => self.ablation = v.parse()?,
            "windows" => {
                self.windows = v.split(',').map(str::parse).collect::<Result<_>>()?;
            }
            "n_docs" => self.synth.n_docs = num(key, v)?,
            "sentences_per_doc" => self.synth.sentences_per_doc = num(key, v)?,
            "vocab_size" => self.synth.vocab_size = num(key, v)?,
            "distractor_mode" => self.synth.distractor_mode = v.parse::<DistractorMode>()?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Numeric ranges and enum consistency; paths are checked separately by
    /// [`RunConfig::check_inputs`].
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.hp.validate()?;
        if self.hp.init_range > 1.0 {
            return Err(Error::Config(format!(
                "init_range must be at most 1, got {}",
                self.hp.init_range
            )));
        }
        if self.windows.is_empty() {
            return Err(Error::Config("windows must not be empty".into()));
        }
        if self.windows.contains(&ContextWindow::Words(0)) {
            return Err(Error::Config("window 0 is not allowed".into()));
        }
        Ok(())
    }

    /// Fails with a message naming the first configured input path that does
    /// not exist.
    pub fn check_inputs(&self) -> Result<()> {
        let inputs = [
            ("train_corpus", &self.train_corpus),
            ("eval_corpus", &self.eval_corpus),
            ("embeddings", &self.embeddings),
        ];
        for (key, p) in inputs {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Error::Config(format!("{key}: no such file {}", p.display())));
                }
            }
        }
        Ok(())
    }

    /// Canonical text form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let p = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        let [a, b, c] = self.model.local_hidden;
        let windows: Vec<String> = self.windows.iter().map(ToString::to_string).collect();
        let values = [
            p(&self.train_corpus),
            p(&self.eval_corpus),
            p(&self.embeddings),
            p(&self.checkpoint),
            p(&self.report),
            self.model.embedding_dim.to_string(),
            self.model.zp_hidden.to_string(),
            format!("{a},{b},{c}"),
            self.model.global_hidden.to_string(),
            self.model.context_window.to_string(),
            self.model.zp_combine.to_string(),
            format!("{:?}", self.hp.lr),
            format!("{:?}", self.hp.init_range),
            self.hp.epochs.to_string(),
            self.hp.seed.to_string(),
            self.hp.shuffle.to_string(),
            self.hp.fine_tune_embeddings.to_string(),
            self.ablation.to_string(),
            windows.join(","),
            self.synth.n_docs.to_string(),
            self.synth.sentences_per_doc.to_string(),
            self.synth.vocab_size.to_string(),
            self.synth.distractor_mode.to_string(),
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

impl Error {
    fn config_message(&self) -> String {
        match self {
            Error::Config(m) => m.clone(),
            other => other.to_string(),
        }
    }
}
