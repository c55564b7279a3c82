//! Deterministic synthetic corpus of labeled feature sequences.
//!
//! Each word class is a viseme sequence. A rendered sample holds, for every
//! viseme in order, a run of frames equal to that viseme's fixed unit-norm
//! prototype plus the speaker's offset plus Gaussian noise. Perturbation
//! rotates all frames in a random 2-plane (a pose analog) and jitters the
//! timeline by duplicating or dropping frames.
//!
//! Every record draws from its own stream keyed by
//! `(seed, split, class, sample index)`, so the corpus is a pure function of
//! [`CorpusConfig`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::array::NumericArray;
use crate::error::{Error, Result};
use crate::lexicon::{self, PronouncingLexicon, VariantPolicy, VisemeId, VisemeTable};
use crate::math;
use crate::rng::{self, Rng};
use crate::VISEME_COUNT;

const STREAM_VOCAB: u64 = 1;
const STREAM_PROTOTYPES: u64 = 2;
const STREAM_SPEAKERS: u64 = 3;
const STREAM_RECORDS: u64 = 4;
const STREAM_SELECTION: u64 = 5;

/// Temporal jitter edits at most this fraction of frames when ρ = 1.
pub const MAX_JITTER_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    CleanTrain,
    DiverseTrain,
    CleanTest,
    PerturbedTest,
}

impl SplitKind {
    pub const ALL: [SplitKind; 4] = [
        SplitKind::CleanTrain,
        SplitKind::DiverseTrain,
        SplitKind::CleanTest,
        SplitKind::PerturbedTest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SplitKind::CleanTrain => "clean_train",
            SplitKind::DiverseTrain => "diverse_train",
            SplitKind::CleanTest => "clean_test",
            SplitKind::PerturbedTest => "perturbed_test",
        }
    }

    fn stream_id(self) -> u64 {
        self as u64 + 1
    }

    pub fn is_test(self) -> bool {
        matches!(self, SplitKind::CleanTest | SplitKind::PerturbedTest)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitCounts {
    pub clean_train: usize,
    pub diverse_train: usize,
    pub clean_test: usize,
    pub perturbed_test: usize,
}

impl Default for SplitCounts {
    fn default() -> Self {
        Self {
            clean_train: 50,
            diverse_train: 50,
            clean_test: 20,
            perturbed_test: 20,
        }
    }
}

impl SplitCounts {
    pub fn get(&self, kind: SplitKind) -> usize {
        match kind {
            SplitKind::CleanTrain => self.clean_train,
            SplitKind::DiverseTrain => self.diverse_train,
            SplitKind::CleanTest => self.clean_test,
            SplitKind::PerturbedTest => self.perturbed_test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub num_classes: usize,
    pub feature_dim: usize,
    /// Inclusive range of frames rendered per viseme.
    pub frames_per_viseme: [usize; 2],
    pub noise_sigma: f64,
    /// Speaker pool size; the last `test_speakers` ids are held out for testing.
    pub num_speakers: usize,
    pub test_speakers: usize,
    /// Training speakers used by `clean_train` (the first ids of the pool).
    pub clean_train_speakers: usize,
    pub speaker_sigma: f64,
    /// ρ applied to every `diverse_train` record.
    pub perturbation_strength: f64,
    /// ρ applied to the perturbed share of `perturbed_test`.
    pub test_perturbation_strength: f64,
    /// Fraction of `perturbed_test` left unperturbed.
    pub clean_retention: f64,
    /// Rotation angle at ρ = 1, in degrees.
    pub max_rotation_degrees: f64,
    pub samples_per_class: SplitCounts,
    pub seed: u64,
    /// Real words labeled through the lexicon; `None` draws synthetic
    /// viseme strings.
    pub words: Option<Vec<String>>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            num_classes: 50,
            feature_dim: 16,
            frames_per_viseme: [4, 8],
            noise_sigma: 0.3,
            num_speakers: 40,
            test_speakers: 8,
            clean_train_speakers: 2,
            speaker_sigma: 0.1,
            perturbation_strength: 0.5,
            test_perturbation_strength: 0.8,
            clean_retention: 0.2,
            max_rotation_degrees: 60.0,
            samples_per_class: SplitCounts::default(),
            seed: 2024,
            words: None,
        }
    }
}

fn config_error(message: impl Into<String>) -> Error {
    Error::Config(message.into())
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.feature_dim == 0 {
            return Err(config_error("num_classes and feature_dim must be at least 1"));
        }
        let [lo, hi] = self.frames_per_viseme;
        if lo == 0 || lo > hi {
            return Err(config_error(format!("frames_per_viseme [{lo}, {hi}] must satisfy 1 <= min <= max")));
        }
        for (name, v) in [("noise_sigma", self.noise_sigma), ("speaker_sigma", self.speaker_sigma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(config_error(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        for (name, v) in [
            ("perturbation_strength", self.perturbation_strength),
            ("test_perturbation_strength", self.test_perturbation_strength),
            ("clean_retention", self.clean_retention),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(config_error(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.max_rotation_degrees.is_finite() && self.max_rotation_degrees >= 0.0) {
            return Err(config_error("max_rotation_degrees must be finite and >= 0"));
        }
        if self.num_speakers == 0 || self.test_speakers == 0 {
            return Err(config_error("num_speakers and test_speakers must be at least 1"));
        }
        if self.test_speakers >= self.num_speakers {
            return Err(config_error(format!(
                "{} test speakers leave no training speakers out of {}",
                self.test_speakers, self.num_speakers
            )));
        }
        let train_speakers = self.num_speakers - self.test_speakers;
        if self.clean_train_speakers == 0 || self.clean_train_speakers > train_speakers {
            return Err(config_error(format!(
                "clean_train_speakers must lie in [1, {train_speakers}], got {}",
                self.clean_train_speakers
            )));
        }
        for kind in SplitKind::ALL {
            if self.samples_per_class.get(kind) == 0 {
                return Err(config_error(format!("samples_per_class.{} must be at least 1", kind.name())));
            }
        }
        if let Some(words) = &self.words {
            if words.len() != self.num_classes {
                return Err(config_error(format!(
                    "{} words listed but num_classes is {}",
                    words.len(),
                    self.num_classes
                )));
            }
        }
        Ok(())
    }

    pub fn train_speaker_ids(&self) -> core::ops::Range<usize> {
        0..self.num_speakers - self.test_speakers
    }

    pub fn test_speaker_ids(&self) -> core::ops::Range<usize> {
        self.num_speakers - self.test_speakers..self.num_speakers
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabularyWord {
    pub class: usize,
    /// Source word for the real-word path.
    pub word: Option<String>,
    pub visemes: Vec<VisemeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyVocabulary {
    pub words: Vec<VocabularyWord>,
    /// Homophene collisions found on the real-word path.
    pub warnings: Vec<String>,
}

impl ToyVocabulary {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn multi_hot(&self, class: usize) -> [u8; VISEME_COUNT] {
        lexicon::multi_hot(&self.words[class].visemes)
    }
}

/// Builds the class inventory: real words when `config.words` is set (which
/// requires `lexicon`), otherwise synthetic sequences of 2–6 visemes whose
/// viseme multisets are pairwise distinct.
pub fn build_toy_vocabulary(
    config: &CorpusConfig,
    lexicon: Option<(&PronouncingLexicon, &VisemeTable)>,
) -> Result<ToyVocabulary> {
    config.validate()?;
    if let Some(words) = &config.words {
        let (lex, table) =
            lexicon.ok_or_else(|| config_error("a word list needs a pronouncing dictionary"))?;
        let mut seen: BTreeMap<Vec<VisemeId>, String> = BTreeMap::new();
        let mut warnings = Vec::new();
        let mut entries = Vec::with_capacity(words.len());
        for (class, word) in words.iter().enumerate() {
            let label = lexicon::word_to_multihot(table, lex, word, VariantPolicy::First)?;
            if label.viseme_sequence.is_empty() {
                return Err(config_error(format!("word `{word}` has no visemes")));
            }
            if let Some(other) = seen.get(&label.viseme_sequence) {
                warnings.push(format!(
                    "`{}` and `{}` share a viseme sequence",
                    other, label.word
                ));
            } else {
                seen.insert(label.viseme_sequence.clone(), label.word.clone());
            }
            entries.push(VocabularyWord {
                class,
                word: Some(label.word),
                visemes: label.viseme_sequence,
            });
        }
        return Ok(ToyVocabulary {
            words: entries,
            warnings,
        });
    }

    let mut rng = rng::stream(config.seed, &[STREAM_VOCAB]);
    let mut seen_sets = Vec::<Vec<VisemeId>>::new();
    let mut entries = Vec::with_capacity(config.num_classes);
    while entries.len() < config.num_classes {
        let length = rng.random_range(2..=6);
        let visemes: Vec<VisemeId> = (0..length)
            .map(|_| VisemeId::new(rng.random_range(0..VISEME_COUNT)))
            .collect::<Result<_>>()?;
        let mut key = visemes.clone();
        key.sort_unstable();
        if seen_sets.contains(&key) {
            continue;
        }
        seen_sets.push(key);
        entries.push(VocabularyWord {
            class: entries.len(),
            word: None,
            visemes,
        });
    }
    Ok(ToyVocabulary {
        words: entries,
        warnings: Vec::new(),
    })
}

/// One labeled feature sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    /// `T×D_in`
    pub features: NumericArray,
    pub word_class: usize,
    pub viseme_multihot: [u8; VISEME_COUNT],
    pub speaker_id: usize,
    pub perturbed: bool,
}

impl SampleRecord {
    pub fn frames(&self) -> usize {
        self.features.rows()
    }
}

fn gaussian_vector(rng: &mut Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Renders records for a fixed vocabulary and config.
#[derive(Debug, Clone)]
pub struct CorpusGenerator {
    config: CorpusConfig,
    vocabulary: ToyVocabulary,
    prototypes: NumericArray,
    speaker_offsets: NumericArray,
}

impl CorpusGenerator {
    pub fn new(config: CorpusConfig, vocabulary: ToyVocabulary) -> Result<Self> {
        config.validate()?;
        if vocabulary.len() != config.num_classes {
            return Err(config_error(format!(
                "vocabulary has {} classes, config expects {}",
                vocabulary.len(),
                config.num_classes
            )));
        }
        let dim = config.feature_dim;
        let mut rng = rng::stream(config.seed, &[STREAM_PROTOTYPES]);
        let mut prototypes = NumericArray::zeros(&[VISEME_COUNT, dim]);
        for v in 0..VISEME_COUNT {
            let mut e = gaussian_vector(&mut rng, dim, 1.0);
            while math::norm(&e) < 1e-6 {
                e = gaussian_vector(&mut rng, dim, 1.0);
            }
            let n = math::norm(&e);
            for (dst, x) in prototypes.row_mut(v).iter_mut().zip(&e) {
                *dst = x / n;
            }
        }
        let mut speaker_offsets = NumericArray::zeros(&[config.num_speakers, dim]);
        for s in 0..config.num_speakers {
            let mut rng = rng::stream(config.seed, &[STREAM_SPEAKERS, s as u64]);
            let offset = gaussian_vector(&mut rng, dim, config.speaker_sigma);
            speaker_offsets.row_mut(s).copy_from_slice(&offset);
        }
        Ok(Self {
            config,
            vocabulary,
            prototypes,
            speaker_offsets,
        })
    }

    /// Convenience: builds the vocabulary and the generator together.
    pub fn from_config(
        config: CorpusConfig,
        lexicon: Option<(&PronouncingLexicon, &VisemeTable)>,
    ) -> Result<Self> {
        let vocabulary = build_toy_vocabulary(&config, lexicon)?;
        Self::new(config, vocabulary)
    }

    pub fn config(&self) -> &CorpusConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &ToyVocabulary {
        &self.vocabulary
    }

    /// Unit-norm prototype of every viseme, `18×D_in`.
    pub fn prototypes(&self) -> &NumericArray {
        &self.prototypes
    }

    pub fn speaker_offset(&self, speaker: usize) -> &[f64] {
        self.speaker_offsets.row(speaker)
    }

    pub fn render_sample(&self, class: usize, speaker: usize, rng: &mut Rng) -> Result<SampleRecord> {
        if class >= self.vocabulary.len() {
            return Err(Error::Index {
                index: class,
                classes: self.vocabulary.len(),
            });
        }
        if speaker >= self.config.num_speakers {
            return Err(config_error(format!("speaker {speaker} outside the pool")));
        }
        let [lo, hi] = self.config.frames_per_viseme;
        let dim = self.config.feature_dim;
        let offset = self.speaker_offset(speaker);
        let mut data = Vec::new();
        for &v in &self.vocabulary.words[class].visemes {
            let run = rng.random_range(lo..=hi);
            for _ in 0..run {
                let proto = self.prototypes.row(v.index());
                for k in 0..dim {
                    let noise = if self.config.noise_sigma > 0.0 {
                        self.config.noise_sigma * rng.sample::<f64, _>(StandardNormal)
                    } else {
                        0.0
                    };
                    data.push(proto[k] + offset[k] + noise);
                }
            }
        }
        let frames = data.len() / dim;
        Ok(SampleRecord {
            features: NumericArray::from_vec(vec![frames, dim], data)?,
            word_class: class,
            viseme_multihot: self.vocabulary.multi_hot(class),
            speaker_id: speaker,
            perturbed: false,
        })
    }

    pub fn perturb_sample(&self, record: &SampleRecord, strength: f64, rng: &mut Rng) -> Result<SampleRecord> {
        let min_frames = self.vocabulary.words[record.word_class].visemes.len();
        perturb_sample(record, strength, self.config.max_rotation_degrees, min_frames, rng)
    }

    pub fn generate_split(&self, kind: SplitKind) -> Result<Vec<SampleRecord>> {
        let cfg = &self.config;
        let per_class = cfg.samples_per_class.get(kind);
        let speakers: Vec<usize> = match kind {
            SplitKind::CleanTrain => cfg.train_speaker_ids().take(cfg.clean_train_speakers).collect(),
            SplitKind::DiverseTrain => cfg.train_speaker_ids().collect(),
            SplitKind::CleanTest | SplitKind::PerturbedTest => cfg.test_speaker_ids().collect(),
        };
        let total = per_class * cfg.num_classes;
        let perturb: Vec<bool> = match kind {
            SplitKind::CleanTrain | SplitKind::CleanTest => vec![false; total],
            SplitKind::DiverseTrain => vec![true; total],
            SplitKind::PerturbedTest => {
                let retained = math::round(cfg.clean_retention * total as f64) as usize;
                let mut order: Vec<usize> = (0..total).collect();
                order.shuffle(&mut rng::stream(cfg.seed, &[STREAM_SELECTION, kind.stream_id()]));
                let mut flags = vec![true; total];
                for &i in &order[..retained.min(total)] {
                    flags[i] = false;
                }
                flags
            }
        };
        let strength = match kind {
            SplitKind::PerturbedTest => cfg.test_perturbation_strength,
            _ => cfg.perturbation_strength,
        };

        let mut records = Vec::with_capacity(total);
        for class in 0..cfg.num_classes {
            for i in 0..per_class {
                let mut rng = rng::stream(
                    cfg.seed,
                    &[STREAM_RECORDS, kind.stream_id(), class as u64, i as u64],
                );
                let speaker = speakers[rng.random_range(0..speakers.len())];
                let mut record = self.render_sample(class, speaker, &mut rng)?;
                if perturb[records.len()] {
                    record = self.perturb_sample(&record, strength, &mut rng)?;
                }
                records.push(record);
            }
        }
        Ok(records)
    }
}

/// Rotates every frame by `strength · max_rotation_degrees` in a random
/// 2-plane and duplicates or drops up to `0.2 · strength · T` frames, never
/// going below `min_frames`. Labels are untouched; the flag is set.
pub fn perturb_sample(
    record: &SampleRecord,
    strength: f64,
    max_rotation_degrees: f64,
    min_frames: usize,
    rng: &mut Rng,
) -> Result<SampleRecord> {
    if !(0.0..=1.0).contains(&strength) {
        return Err(config_error(format!("perturbation strength must lie in [0, 1], got {strength}")));
    }
    let mut out = record.clone();
    out.perturbed = true;
    if strength == 0.0 {
        return Ok(out);
    }
    let (frames, dim) = record.features.expect_matrix("features")?;

    let angle = strength * max_rotation_degrees.to_radians();
    if dim >= 2 && angle != 0.0 {
        let (u, v) = random_plane(rng, dim);
        let (c, s) = (math::cos(angle), math::sin(angle));
        for j in 0..frames {
            let row = out.features.row_mut(j);
            let a = math::dot(row, &u);
            let b = math::dot(row, &v);
            // x' = x + (a(c-1) - b s) u + (a s + b(c-1)) v
            let cu = a * (c - 1.0) - b * s;
            let cv = a * s + b * (c - 1.0);
            math::axpy(row, cu, &u);
            math::axpy(row, cv, &v);
        }
    }

    let max_edits = math::round(MAX_JITTER_FRACTION * strength * frames as f64) as usize;
    let edits = rng.random_range(0..=max_edits);
    if edits > 0 {
        let mut rows: Vec<Vec<f64>> = out.features.row_iter().map(<[f64]>::to_vec).collect();
        for _ in 0..edits {
            let at = rng.random_range(0..rows.len());
            let drop = rng.random_bool(0.5) && rows.len() > min_frames.max(1);
            if drop {
                rows.remove(at);
            } else {
                let copy = rows[at].clone();
                rows.insert(at, copy);
            }
        }
        out.features = NumericArray::from_rows(&rows)?;
    }
    Ok(out)
}

/// Two random orthonormal vectors.
fn random_plane(rng: &mut Rng, dim: usize) -> (Vec<f64>, Vec<f64>) {
    loop {
        let mut u = gaussian_vector(rng, dim, 1.0);
        let mut v = gaussian_vector(rng, dim, 1.0);
        let nu = math::norm(&u);
        if nu < 1e-6 {
            continue;
        }
        u.iter_mut().for_each(|x| *x /= nu);
        let proj = math::dot(&u, &v);
        math::axpy(&mut v, -proj, &u);
        let nv = math::norm(&v);
        if nv < 1e-6 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        return (u, v);
    }
}

/// Mean frame of each record, the input of the nearest-prototype sanity check.
pub fn mean_frame(record: &SampleRecord) -> Result<Vec<f64>> {
    crate::ops::mean_over_time(&record.features)
}

/// Accuracy of a nearest-class-mean classifier fitted on `train`.
pub fn nearest_prototype_accuracy(train: &[SampleRecord], test: &[SampleRecord], classes: usize) -> Result<f64> {
    let dim = train
        .first()
        .map(|r| r.features.cols())
        .ok_or_else(|| config_error("empty training split"))?;
    let mut sums = vec![vec![0.0; dim]; classes];
    let mut counts = vec![0usize; classes];
    for r in train {
        let m = mean_frame(r)?;
        math::axpy(&mut sums[r.word_class], 1.0, &m);
        counts[r.word_class] += 1;
    }
    let centroids: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &n)| s.iter().map(|x| x / n.max(1) as f64).collect())
        .collect();
    let mut correct = 0usize;
    for r in test {
        let m = mean_frame(r)?;
        let best = centroids
            .iter()
            .enumerate()
            .map(|(c, centroid)| {
                let d: f64 = centroid.iter().zip(&m).map(|(a, b)| (a - b) * (a - b)).sum();
                (c, d)
            })
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        correct += (best.0 == r.word_class) as usize;
    }
    Ok(correct as f64 / test.len().max(1) as f64)
}

impl core::fmt::Display for SplitKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SplitKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| config_error(format!("unknown split `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> CorpusConfig {
        CorpusConfig {
            num_classes: 10,
            samples_per_class: SplitCounts {
                clean_train: 5,
                diverse_train: 5,
                clean_test: 20,
                perturbed_test: 10,
            },
            ..CorpusConfig::default()
        }
    }

    #[test]
    fn synthetic_vocabulary_is_deterministic_and_distinct() {
        let cfg = CorpusConfig::default();
        let a = build_toy_vocabulary(&cfg, None).unwrap();
        let b = build_toy_vocabulary(&cfg, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        for (i, w) in a.words.iter().enumerate() {
            assert_eq!(w.class, i);
            assert!((2..=6).contains(&w.visemes.len()));
        }
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                assert_ne!(a.words[i].visemes, a.words[j].visemes);
            }
        }
    }

    #[test]
    fn single_class_vocabulary() {
        let cfg = CorpusConfig {
            num_classes: 1,
            ..CorpusConfig::default()
        };
        let v = build_toy_vocabulary(&cfg, None).unwrap();
        assert_eq!(v.len(), 1);
        assert!(!v.words[0].visemes.is_empty());
    }

    #[test]
    fn word_list_requires_lexicon() {
        let cfg = CorpusConfig {
            num_classes: 1,
            words: Some(vec!["BET".into()]),
            ..CorpusConfig::default()
        };
        assert!(matches!(build_toy_vocabulary(&cfg, None), Err(Error::Config(_))));
    }

    #[test]
    fn homophene_words_are_kept_with_a_warning() {
        let lex = lexicon::parse_pronouncing_dictionary("BET  B EH1 T\nBAT  B AE1 T\nCHOKE  CH OW1 K\n").unwrap();
        let table = VisemeTable::shipped();
        let cfg = CorpusConfig {
            num_classes: 3,
            words: Some(vec!["bet".into(), "choke".into(), "bat".into()]),
            ..CorpusConfig::default()
        };
        let v = build_toy_vocabulary(&cfg, Some((&lex, &table))).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.warnings.len(), 1);
        assert_eq!(v.words[0].visemes, v.words[2].visemes);
        assert_eq!(v.words[1].word.as_deref(), Some("CHOKE"));
    }

    #[test]
    fn noiseless_frames_equal_prototypes() {
        let cfg = CorpusConfig {
            noise_sigma: 0.0,
            speaker_sigma: 0.0,
            ..small_config()
        };
        let gen = CorpusGenerator::from_config(cfg, None).unwrap();
        let mut rng = rng::stream(1, &[]);
        let rec = gen.render_sample(3, 0, &mut rng).unwrap();
        let seq = &gen.vocabulary().words[3].visemes;
        let mut expected = Vec::new();
        for row in rec.features.row_iter() {
            let v = (0..VISEME_COUNT)
                .find(|&v| gen.prototypes().row(v) == row)
                .expect("frame is a prototype");
            if expected.last() != Some(&v) {
                expected.push(v);
            }
        }
        let mut collapsed: Vec<usize> = seq.iter().map(|v| v.index()).collect();
        collapsed.dedup();
        assert_eq!(expected, collapsed);
        assert!(rec.frames() >= seq.len());
    }

    #[test]
    fn rendering_is_deterministic() {
        let gen = CorpusGenerator::from_config(small_config(), None).unwrap();
        let a = gen.render_sample(2, 1, &mut rng::stream(9, &[1])).unwrap();
        let b = gen.render_sample(2, 1, &mut rng::stream(9, &[1])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_scale_matches_chi_expectation() {
        let cfg = CorpusConfig {
            noise_sigma: 0.1,
            speaker_sigma: 0.0,
            ..small_config()
        };
        let gen = CorpusGenerator::from_config(cfg, None).unwrap();
        let mut rng = rng::stream(5, &[]);
        let mut total = 0.0;
        let mut frames = 0usize;
        let class = 0;
        let seq = gen.vocabulary().words[class].visemes.clone();
        while frames < 1000 {
            let rec = gen.render_sample(class, 0, &mut rng).unwrap();
            // frames follow the sequence; recover each frame's viseme by
            // nearest prototype among the sequence members
            for row in rec.features.row_iter() {
                let d = seq
                    .iter()
                    .map(|v| {
                        let p = gen.prototypes().row(v.index());
                        p.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
                    })
                    .fold(f64::INFINITY, f64::min);
                total += d;
                frames += 1;
            }
        }
        // E‖N(0, σ²I₁₆)‖ = σ·√2·Γ(17/2)/Γ(8)
        let expected = 0.1 * 3.938025621887329;
        let mean = total / frames as f64;
        assert!((mean - expected).abs() < 0.1 * expected, "{mean} vs {expected}");
    }

    #[test]
    fn perturbation_examples() {
        let gen = CorpusGenerator::from_config(small_config(), None).unwrap();
        let rec = gen.render_sample(1, 0, &mut rng::stream(2, &[])).unwrap();
        let same = gen.perturb_sample(&rec, 0.0, &mut rng::stream(3, &[])).unwrap();
        assert!(same.perturbed);
        assert_eq!(same.features, rec.features);

        for seed in 0..20 {
            let p = gen.perturb_sample(&rec, 1.0, &mut rng::stream(seed, &[])).unwrap();
            assert_eq!(p.word_class, rec.word_class);
            assert_eq!(p.viseme_multihot, rec.viseme_multihot);
            let t = rec.frames() as f64;
            assert!((p.frames() as f64 - t).abs() <= (0.2 * t).round());
        }
    }

    #[test]
    fn rotation_preserves_frame_norms() {
        let rec = SampleRecord {
            features: NumericArray::from_rows(&[vec![1.0, 2.0, -0.5, 3.0], vec![0.0, -1.0, 4.0, 0.25]]).unwrap(),
            word_class: 0,
            viseme_multihot: [0; VISEME_COUNT],
            speaker_id: 0,
            perturbed: false,
        };
        for seed in 0..50 {
            // min_frames = 2 blocks drops; with T=2 the jitter budget rounds to 0
            let p = perturb_sample(&rec, 1.0, 60.0, 2, &mut rng::stream(seed, &[])).unwrap();
            assert_eq!(p.frames(), 2);
            for j in 0..2 {
                let before = math::norm(rec.features.row(j));
                let after = math::norm(p.features.row(j));
                assert!((before - after).abs() < 1e-9);
            }
            assert_ne!(p.features, rec.features);
        }
    }

    #[test]
    fn split_sizes_and_flags() {
        let gen = CorpusGenerator::from_config(small_config(), None).unwrap();
        let clean = gen.generate_split(SplitKind::CleanTest).unwrap();
        assert_eq!(clean.len(), 200);
        assert!(clean.iter().all(|r| !r.perturbed));
        let perturbed = gen.generate_split(SplitKind::PerturbedTest).unwrap();
        assert_eq!(perturbed.len(), 100);
        assert_eq!(perturbed.iter().filter(|r| r.perturbed).count(), 80);
        assert_eq!(perturbed, gen.generate_split(SplitKind::PerturbedTest).unwrap());
    }

    #[test]
    fn test_speakers_are_held_out() {
        let gen = CorpusGenerator::from_config(small_config(), None).unwrap();
        let test_ids = gen.config().test_speaker_ids();
        for kind in [SplitKind::CleanTrain, SplitKind::DiverseTrain] {
            assert!(gen.generate_split(kind).unwrap().iter().all(|r| !test_ids.contains(&r.speaker_id)));
        }
        for kind in [SplitKind::CleanTest, SplitKind::PerturbedTest] {
            assert!(gen.generate_split(kind).unwrap().iter().all(|r| test_ids.contains(&r.speaker_id)));
        }
    }

    #[test]
    fn labels_are_sound() {
        let gen = CorpusGenerator::from_config(small_config(), None).unwrap();
        for kind in SplitKind::ALL {
            for r in gen.generate_split(kind).unwrap() {
                assert_eq!(r.viseme_multihot, lexicon::multi_hot(&gen.vocabulary().words[r.word_class].visemes));
            }
        }
    }

    #[test]
    fn config_errors() {
        let mut cfg = small_config();
        cfg.test_speakers = cfg.num_speakers;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = small_config();
        cfg.samples_per_class.clean_test = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_config();
        cfg.perturbation_strength = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = small_config();
        cfg.noise_sigma = -0.1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn noiseless_single_speaker_task_is_separable() {
        let cfg = CorpusConfig {
            noise_sigma: 0.0,
            speaker_sigma: 0.0,
            ..CorpusConfig::default()
        };
        let gen = CorpusGenerator::from_config(cfg, None).unwrap();
        let train = gen.generate_split(SplitKind::CleanTrain).unwrap();
        let test = gen.generate_split(SplitKind::CleanTest).unwrap();
        let acc = nearest_prototype_accuracy(&train, &test, 50).unwrap();
        assert_eq!(acc, 1.0);
    }
}
