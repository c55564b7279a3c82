//! On-disk corpus: one JSON-lines file per split plus `manifest.json`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use lipgen_core::corpus::{CorpusConfig, CorpusGenerator, SampleRecord, SplitKind, ToyVocabulary};
use lipgen_core::lexicon::VisemeTable;
use lipgen_core::{NumericArray, VISEME_COUNT};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CORPUS_FORMAT: &str = "lipgen-corpus";
pub const CORPUS_VERSION: u32 = 1;

/// A record as stored: features as nested arrays, one row per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordLine {
    pub word_class: usize,
    pub speaker_id: usize,
    pub perturbed: bool,
    pub viseme_multihot: Vec<u8>,
    pub features: Vec<Vec<f64>>,
}

impl From<&SampleRecord> for RecordLine {
    fn from(r: &SampleRecord) -> Self {
        Self {
            word_class: r.word_class,
            speaker_id: r.speaker_id,
            perturbed: r.perturbed,
            viseme_multihot: r.viseme_multihot.to_vec(),
            features: r.features.row_iter().map(<[f64]>::to_vec).collect(),
        }
    }
}

impl RecordLine {
    fn into_record(self, feature_dim: usize) -> std::result::Result<SampleRecord, String> {
        let multi_hot: [u8; VISEME_COUNT] = self
            .viseme_multihot
            .try_into()
            .map_err(|v: Vec<u8>| format!("viseme_multihot has {} entries", v.len()))?;
        if multi_hot.iter().any(|&b| b > 1) {
            return Err("viseme_multihot must be 0/1".into());
        }
        if self.features.is_empty() || self.features.iter().any(|row| row.len() != feature_dim) {
            return Err(format!("features must be a non-empty T×{feature_dim} array"));
        }
        Ok(SampleRecord {
            features: NumericArray::from_rows(&self.features).map_err(|e| e.to_string())?,
            word_class: self.word_class,
            viseme_multihot: multi_hot,
            speaker_id: self.speaker_id,
            perturbed: self.perturbed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitEntry {
    pub split: SplitKind,
    pub file: String,
    pub records: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub config: CorpusConfig,
    pub viseme_groups: Vec<String>,
    pub vocabulary: ToyVocabulary,
    pub splits: Vec<SplitEntry>,
}

/// A corpus held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub config: CorpusConfig,
    pub vocabulary: ToyVocabulary,
    pub splits: BTreeMap<SplitKind, Vec<SampleRecord>>,
}

impl Corpus {
    pub fn generate(generator: &CorpusGenerator) -> Result<Self> {
        let splits = SplitKind::ALL
            .iter()
            .map(|&k| Ok((k, generator.generate_split(k)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            config: generator.config().clone(),
            vocabulary: generator.vocabulary().clone(),
            splits,
        })
    }

    pub fn split(&self, kind: SplitKind) -> &[SampleRecord] {
        self.splits.get(&kind).map_or(&[], Vec::as_slice)
    }

    /// Records of `kinds`, concatenated in the given order.
    pub fn records<'a>(&'a self, kinds: &[SplitKind]) -> Vec<&'a SampleRecord> {
        kinds.iter().flat_map(|&k| self.split(k)).collect()
    }
}

fn split_file(kind: SplitKind) -> String {
    format!("{}.jsonl", kind.name())
}

fn encode_split(records: &[SampleRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, &RecordLine::from(r)).expect("records serialize");
        out.write_all(b"\n").expect("vec write");
    }
    out
}

/// Writes the four split files and the manifest into `dir`.
pub fn write_corpus(dir: &Path, corpus: &Corpus, table: &VisemeTable) -> Result<CorpusManifest> {
    let mut splits = Vec::new();
    for kind in SplitKind::ALL {
        let bytes = encode_split(corpus.split(kind));
        let file = split_file(kind);
        io::write_atomic(&dir.join(&file), &bytes)?;
        splits.push(SplitEntry {
            split: kind,
            file,
            records: corpus.split(kind).len(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    let manifest = CorpusManifest {
        format: CORPUS_FORMAT.into(),
        version: CORPUS_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config: corpus.config.clone(),
        viseme_groups: table.groups().iter().map(|g| g.name.clone()).collect(),
        vocabulary: corpus.vocabulary.clone(),
        splits,
    };
    io::write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}

pub fn read_manifest(dir: &Path) -> Result<CorpusManifest> {
    let path = manifest_path(dir);
    if !path.is_file() {
        return Err(Error::format(
            dir,
            "no corpus here (manifest.json missing); run `lipgen generate` first",
        ));
    }
    let manifest: CorpusManifest = io::read_json(&path)?;
    if manifest.format != CORPUS_FORMAT || manifest.version != CORPUS_VERSION {
        return Err(Error::format(
            &path,
            format!("unsupported corpus format {} v{}", manifest.format, manifest.version),
        ));
    }
    Ok(manifest)
}

/// Loads and verifies (checksums, shapes, labels) a corpus written by
/// [`write_corpus`].
pub fn read_corpus(dir: &Path) -> Result<Corpus> {
    let manifest = read_manifest(dir)?;
    let dim = manifest.config.feature_dim;
    let mut splits = BTreeMap::new();
    for entry in &manifest.splits {
        let path = dir.join(&entry.file);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if hex::encode(Sha256::digest(&bytes)) != entry.sha256 {
            return Err(Error::format(&path, "checksum does not match the manifest"));
        }
        let text = io::decode_text(bytes);
        let mut records = Vec::with_capacity(entry.records);
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: RecordLine =
                serde_json::from_str(line).map_err(|e| Error::format(&path, format!("line {}: {e}", n + 1)))?;
            let record = parsed
                .into_record(dim)
                .map_err(|e| Error::format(&path, format!("line {}: {e}", n + 1)))?;
            let expected = manifest
                .vocabulary
                .words
                .get(record.word_class)
                .map(|_| manifest.vocabulary.multi_hot(record.word_class));
            if expected != Some(record.viseme_multihot) {
                return Err(Error::format(
                    &path,
                    format!("line {}: labels disagree with the vocabulary", n + 1),
                ));
            }
            records.push(record);
        }
        if records.len() != entry.records {
            return Err(Error::format(
                &path,
                format!("{} records, manifest says {}", records.len(), entry.records),
            ));
        }
        splits.insert(entry.split, records);
    }
    if splits.len() != SplitKind::ALL.len() {
        return Err(Error::format(manifest_path(dir), "manifest must list all four splits"));
    }
    Ok(Corpus {
        config: manifest.config,
        vocabulary: manifest.vocabulary,
        splits,
    })
}
