//! Experiment configuration: one JSON document, dotted command-line
//! overrides, and a content hash for traceability.

use std::path::{Path, PathBuf};

use lipgen_core::corpus::CorpusConfig;
use lipgen_core::model::ModelConfig;
use lipgen_core::train::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Pronouncing dictionary; the bundled CMU dictionary when absent.
    pub dictionary: Option<PathBuf>,
    /// Viseme table; the bundled 18-group table when absent.
    pub viseme_table: Option<PathBuf>,
    pub corpus_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dictionary: None,
            viseme_table: None,
            corpus_dir: PathBuf::from("corpus"),
            checkpoint: PathBuf::from("model.ckpt.json"),
            report_dir: PathBuf::from("reports"),
        }
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.corpus_dir);
        join(&mut self.checkpoint);
        join(&mut self.report_dir);
        if let Some(p) = &mut self.dictionary {
            join(p);
        }
        if let Some(p) = &mut self.viseme_table {
            join(p);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub corpus: CorpusConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub paths: Paths,
    /// Seeds used by `ablate`.
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            corpus: CorpusConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            paths: Paths::default(),
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

/// A `key.path = value` assignment from the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: String,
    pub value: Value,
}

impl Override {
    pub fn new(path: impl Into<String>, value: Value) -> Self {
        Self {
            path: path.into(),
            value,
        }
    }
}

/// Short flags accepted in place of full dotted paths.
const ALIASES: &[(&str, &str)] = &[
    ("lambda", "model.tafm.lambda"),
    ("beta", "model.beta"),
    ("gamma", "model.tafm.gamma"),
    ("seed", "train.seed"),
    ("epochs", "train.epochs"),
];

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()))
}

/// `--gamma inf` selects the max-pooling limit, `--gamma 10` a finite
/// temperature.
fn gamma_value(value: Value) -> Value {
    match &value {
        Value::String(s) if matches!(s.as_str(), "inf" | "infinite" | "infinity") => {
            serde_json::json!({ "mode": "infinite" })
        }
        Value::Number(_) => serde_json::json!({ "mode": "finite", "gamma": value }),
        _ => value,
    }
}

/// Parses `--a.b value` / `--a.b=value` pairs.
pub fn parse_overrides(args: &[String]) -> Result<Vec<Override>> {
    let mut out = Vec::new();
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        let Some(flag) = arg.strip_prefix("--").filter(|f| !f.is_empty()) else {
            return Err(Error::Usage(format!("expected `--key value`, found `{arg}`")));
        };
        let (key, raw) = match flag.split_once('=') {
            Some((k, v)) => (k, v.to_owned()),
            None => {
                let value = iter
                    .next()
                    .ok_or_else(|| Error::Usage(format!("missing value for `--{flag}`")))?;
                (flag, value.clone())
            }
        };
        let path = ALIASES
            .iter()
            .find(|(alias, _)| *alias == key)
            .map_or(key, |(_, full)| full);
        let mut value = parse_value(&raw);
        if path == "model.tafm.gamma" {
            value = gamma_value(value);
        }
        out.push(Override::new(path, value));
    }
    Ok(out)
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        let object = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("`{}` is not a section", segments[..i].join("."))))?;
        let slot = object
            .get_mut(*segment)
            .ok_or_else(|| Error::Config(format!("unknown key `{path}`")))?;
        if i + 1 == segments.len() {
            *slot = value;
            return Ok(());
        }
        node = slot;
    }
    Err(Error::Config("empty override key".into()))
}

impl ExperimentConfig {
    /// Loads `path` (or the defaults), resolves its relative paths against
    /// the config file's directory, applies `overrides` in order (paths given
    /// there stay relative to the working directory) and validates.
    pub fn load(path: Option<&Path>, overrides: &[Override]) -> Result<Self> {
        let config = match path {
            Some(p) => {
                let text = io::read_text(p)?;
                let config: ExperimentConfig =
                    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                let mut config = config;
                config.paths.resolve(p.parent().unwrap_or(Path::new("")));
                config
            }
            None => ExperimentConfig::default(),
        };
        let config = config.with_overrides(overrides)?;
        config.validate()?;
        Ok(config)
    }

    pub fn with_overrides(&self, overrides: &[Override]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut value = serde_json::to_value(self).expect("config serializes");
        for o in overrides {
            set_path(&mut value, &o.path, o.value.clone())?;
        }
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.corpus.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.model.input_dim != self.corpus.feature_dim {
            return Err(Error::Config(format!(
                "model.input_dim ({}) must equal corpus.feature_dim ({})",
                self.model.input_dim, self.corpus.feature_dim
            )));
        }
        if self.model.word_classes != self.corpus.num_classes {
            return Err(Error::Config(format!(
                "model.word_classes ({}) must equal corpus.num_classes ({})",
                self.model.word_classes, self.corpus.num_classes
            )));
        }
        for p in self.paths.dictionary.iter().chain(&self.paths.viseme_table) {
            if !p.is_file() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of everything except `paths`, so the
    /// hash names the experiment rather than where its files live.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        value.as_object_mut().expect("object").remove("paths");
        hex::encode(Sha256::digest(serde_json::to_vec(&value).expect("value serializes")))
    }
}
