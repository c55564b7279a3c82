//! Command-line tooling around `lipgen-core`: config files, the on-disk
//! corpus, checkpoints, reports and the ablation harness.

pub use lipgen_core as core;

pub mod ablation;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corpus_files;
pub mod error;
pub mod experiment;
pub mod io;
pub mod lexicon;
pub mod report;

pub use error::{Error, Result};
