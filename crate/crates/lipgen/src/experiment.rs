//! Shared steps of the `generate`, `train`, `eval` and `ablate` commands.

use lipgen_core::corpus::{CorpusGenerator, SplitKind};
use lipgen_core::lexicon::VisemeTable;
use lipgen_core::model::ModelState;
use lipgen_core::train::{self, EpochRecord, Evaluation, TrainReport, TrainingData};

use crate::config::ExperimentConfig;
use crate::corpus_files::{self, Corpus};
use crate::error::{Error, Result};
use crate::lexicon;

/// Provenance stamped on every report.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl RunMetadata {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config.hash(),
            seed: config.train.seed,
        }
    }
}

/// Builds the corpus described by `config` in memory.
pub fn generate_corpus(config: &ExperimentConfig) -> Result<(Corpus, VisemeTable)> {
    let table = lexicon::load_viseme_table(config.paths.viseme_table.as_deref())?;
    let generator = if config.corpus.words.is_some() {
        let lex = lexicon::load_lexicon(config.paths.dictionary.as_deref())?;
        CorpusGenerator::from_config(config.corpus.clone(), Some((&lex, &table)))?
    } else {
        CorpusGenerator::from_config(config.corpus.clone(), None)?
    };
    Ok((Corpus::generate(&generator)?, table))
}

/// Reads the corpus at `paths.corpus_dir`, refusing one generated from a
/// different corpus config.
pub fn load_corpus(config: &ExperimentConfig) -> Result<Corpus> {
    let dir = &config.paths.corpus_dir;
    let corpus = corpus_files::read_corpus(dir)?;
    if corpus.config != config.corpus {
        return Err(Error::Config(format!(
            "corpus in {} was generated from a different corpus config; regenerate it",
            dir.display()
        )));
    }
    Ok(corpus)
}

/// Loads the corpus if one exists, otherwise generates and writes it.
pub fn load_or_generate_corpus(config: &ExperimentConfig) -> Result<Corpus> {
    if corpus_files::manifest_path(&config.paths.corpus_dir).is_file() {
        return load_corpus(config);
    }
    let (corpus, table) = generate_corpus(config)?;
    corpus_files::write_corpus(&config.paths.corpus_dir, &corpus, &table)?;
    Ok(corpus)
}

/// Initializes from `train.seed` and trains on `train.train_splits`.
pub fn train_model(
    config: &ExperimentConfig,
    corpus: &Corpus,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ModelState, TrainReport)> {
    let state = ModelState::init(&config.model, config.train.seed)?;
    let train_set = corpus.records(&config.train.train_splits);
    let data = TrainingData {
        train: &train_set,
        clean_test: corpus.split(SplitKind::CleanTest),
        perturbed_test: corpus.split(SplitKind::PerturbedTest),
    };
    Ok(train::train(state, &config.model, data, &config.train, on_epoch)?)
}

pub fn evaluate_split(
    state: &ModelState,
    config: &lipgen_core::model::ModelConfig,
    corpus: &Corpus,
    split: SplitKind,
) -> Result<Evaluation> {
    Ok(train::evaluate(state, config, corpus.split(split))?)
}
