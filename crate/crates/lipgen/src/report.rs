//! Train and eval reports as JSON and CSV. Every file carries the config
//! hash, the seed and the tool version; nothing time-dependent is written,
//! so identical runs produce identical bytes.

use std::path::{Path, PathBuf};

use lipgen_core::train::{EpochRecord, Evaluation, TrainReport};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::RunMetadata;
use crate::io;

pub const TRAIN_REPORT_JSON: &str = "train_report.json";
pub const TRAIN_REPORT_CSV: &str = "train_report.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReportFile {
    #[serde(flatten)]
    pub metadata: RunMetadata,
    pub total_steps: usize,
    pub epochs: Vec<EpochRecord>,
}

#[derive(Serialize)]
struct EpochRow<'a> {
    tool_version: &'a str,
    config_hash: &'a str,
    seed: u64,
    epoch: usize,
    mean_total_loss: f64,
    mean_word_loss: f64,
    mean_viseme_loss: f64,
    learning_rate: f64,
    clean_accuracy: f64,
    perturbed_accuracy: f64,
    clean_viseme_f1: Option<f64>,
    perturbed_viseme_f1: Option<f64>,
}

pub fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("rows serialize");
    }
    writer.into_inner().expect("in-memory writer")
}

pub fn train_report_csv(metadata: &RunMetadata, report: &TrainReport) -> Vec<u8> {
    csv_bytes(report.epochs.iter().map(|r| EpochRow {
        tool_version: &metadata.tool_version,
        config_hash: &metadata.config_hash,
        seed: metadata.seed,
        epoch: r.epoch,
        mean_total_loss: r.mean_total_loss,
        mean_word_loss: r.mean_word_loss,
        mean_viseme_loss: r.mean_viseme_loss,
        learning_rate: r.learning_rate,
        clean_accuracy: r.clean_accuracy,
        perturbed_accuracy: r.perturbed_accuracy,
        clean_viseme_f1: r.clean_viseme_f1,
        perturbed_viseme_f1: r.perturbed_viseme_f1,
    }))
}

/// Writes `train_report.json` and `train_report.csv` into `dir`.
pub fn write_train_report(dir: &Path, metadata: &RunMetadata, report: &TrainReport) -> Result<[PathBuf; 2]> {
    let json = dir.join(TRAIN_REPORT_JSON);
    let csv = dir.join(TRAIN_REPORT_CSV);
    io::write_json(
        &json,
        &TrainReportFile {
            metadata: metadata.clone(),
            total_steps: report.total_steps,
            epochs: report.epochs.clone(),
        },
    )?;
    io::write_atomic(&csv, &train_report_csv(metadata, report))?;
    Ok([json, csv])
}

pub fn read_train_report(path: &Path) -> Result<TrainReportFile> {
    io::read_json(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReportFile {
    #[serde(flatten)]
    pub metadata: RunMetadata,
    pub checkpoint: String,
    pub splits: Vec<SplitEvaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEvaluation {
    pub split: String,
    #[serde(flatten)]
    pub evaluation: Evaluation,
}

pub fn write_eval_report(path: &Path, report: &EvalReportFile) -> Result<()> {
    if report.splits.is_empty() {
        return Err(Error::Usage("no splits evaluated".into()));
    }
    io::write_json(path, report)
}
