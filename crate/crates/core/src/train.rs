//! Mini-batch training with mixup, Adam and cosine annealing, plus
//! evaluation (top-1 accuracy, viseme macro-F1, confusion counts).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::array::NumericArray;
use crate::corpus::{SampleRecord, SplitKind};
use crate::error::{Error, Result};
use crate::model::{self, LossParts, ModelConfig, ModelState, WordTarget};
use crate::ops;
use crate::optim::{self, AdamState, LrSchedule};
use crate::rng::{self, Rng};
use crate::VISEME_COUNT;

const STREAM_EPOCH: u64 = 0x3e;
const STREAM_MIXUP: u64 = 0x31;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Floor reached by the cosine schedule on the last step.
    pub min_learning_rate: f64,
    pub seed: u64,
    /// Corpus splits concatenated into the training set.
    pub train_splits: Vec<SplitKind>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            learning_rate: optim::DEFAULT_LEARNING_RATE,
            min_learning_rate: 0.0,
            seed: 1,
            train_splits: vec![SplitKind::CleanTrain, SplitKind::DiverseTrain],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.train_splits.is_empty() || self.train_splits.iter().any(|s| s.is_test()) {
            return Err(Error::Config(format!(
                "train_splits must name training splits only, got {:?}",
                self.train_splits
            )));
        }
        LrSchedule::new(self.learning_rate, self.min_learning_rate, 0).map(|_| ())
    }
}

/// One training item: features with (possibly soft) targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: NumericArray,
    pub word: WordTarget,
    pub visemes: Vec<f64>,
}

impl From<&SampleRecord> for Example {
    fn from(record: &SampleRecord) -> Self {
        Self {
            features: record.features.clone(),
            word: WordTarget::Class(record.word_class),
            visemes: record.viseme_multihot.iter().map(|&b| b as f64).collect(),
        }
    }
}

fn word_distribution(target: &WordTarget, classes: usize) -> Result<Vec<f64>> {
    match target {
        WordTarget::Class(c) if *c < classes => {
            let mut q = vec![0.0; classes];
            q[*c] = 1.0;
            Ok(q)
        }
        WordTarget::Class(c) => Err(Error::Index {
            index: *c,
            classes,
        }),
        WordTarget::Mixed(q) if q.len() == classes => Ok(q.clone()),
        WordTarget::Mixed(q) => Err(Error::Shape(format!("{} target weights for {classes} classes", q.len()))),
    }
}

/// `κ·a + (1−κ)·b`. `κ = 1` and `κ = 0` return the respective input
/// unchanged; otherwise the shorter sequence is zero-padded at the end.
pub fn mix_pair(a: &Example, b: &Example, kappa: f64, classes: usize) -> Result<Example> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::Config(format!("mixing weight must lie in [0, 1], got {kappa}")));
    }
    if kappa == 1.0 {
        return Ok(a.clone());
    }
    if kappa == 0.0 {
        return Ok(b.clone());
    }
    let (ta, d) = a.features.expect_matrix("features")?;
    let (tb, db) = b.features.expect_matrix("features")?;
    if d != db || a.visemes.len() != b.visemes.len() {
        return Err(Error::Shape(format!(
            "cannot mix {:?} with {:?}",
            a.features.shape(),
            b.features.shape()
        )));
    }
    let t = ta.max(tb);
    let mut features = NumericArray::zeros(&[t, d]);
    for j in 0..t {
        let out = features.row_mut(j);
        if j < ta {
            out.iter_mut().zip(a.features.row(j)).for_each(|(o, x)| *o = kappa * x);
        }
        if j < tb {
            out.iter_mut()
                .zip(b.features.row(j))
                .for_each(|(o, x)| *o += (1.0 - kappa) * x);
        }
    }
    let word = match (&a.word, &b.word) {
        (WordTarget::Class(x), WordTarget::Class(y)) if x == y => WordTarget::Class(*x),
        _ => {
            let qa = word_distribution(&a.word, classes)?;
            let qb = word_distribution(&b.word, classes)?;
            WordTarget::Mixed(qa.iter().zip(&qb).map(|(p, q)| kappa * p + (1.0 - kappa) * q).collect())
        }
    };
    let visemes = a
        .visemes
        .iter()
        .zip(&b.visemes)
        .map(|(p, q)| kappa * p + (1.0 - kappa) * q)
        .collect();
    Ok(Example {
        features,
        word,
        visemes,
    })
}

/// Mixes every item with a partner drawn by a random permutation of the
/// batch, with `κ ~ Beta(a, a)` per item. `a = 0` (or a batch of one)
/// leaves the batch unchanged.
pub fn mixup_batch(batch: &[Example], alpha: f64, classes: usize, rng: &mut Rng) -> Result<Vec<Example>> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Config(format!("mixup concentration must be finite and >= 0, got {alpha}")));
    }
    if alpha == 0.0 || batch.len() < 2 {
        return Ok(batch.to_vec());
    }
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::Config(format!("mixup: {e}")))?;
    let mut partners: Vec<usize> = (0..batch.len()).collect();
    partners.shuffle(rng);
    batch
        .iter()
        .zip(&partners)
        .map(|(item, &p)| {
            let kappa: f64 = beta.sample(rng);
            mix_pair(item, &batch[p], kappa, classes)
        })
        .collect()
}

/// Word accuracy, viseme macro-F1 and confusion counts over a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub samples: usize,
    pub accuracy: f64,
    /// `None` when the model has no viseme branch.
    pub viseme_macro_f1: Option<f64>,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<u64>>,
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean over labels of `2tp / (2tp + fp + fn)`, counting a label with no
/// positives and no predictions as 0.
pub fn macro_f1(counts: &[[u64; 3]]) -> f64 {
    if counts.is_empty() {
        return 0.0;
    }
    let total: f64 = counts
        .iter()
        .map(|&[tp, fp, fn_]| {
            let denom = 2 * tp + fp + fn_;
            if denom == 0 {
                0.0
            } else {
                (2 * tp) as f64 / denom as f64
            }
        })
        .sum();
    total / counts.len() as f64
}

/// Scores precomputed outputs: `(word logits, viseme logits, true class,
/// viseme multi-hot)` per sample.
pub fn score_outputs<'a, I>(classes: usize, outputs: I) -> Result<Evaluation>
where
    I: IntoIterator<Item = (&'a [f64], Option<&'a [f64]>, usize, &'a [u8; VISEME_COUNT])>,
{
    let mut confusion = vec![vec![0u64; classes]; classes];
    let mut label_counts = [[0u64; 3]; VISEME_COUNT];
    let mut samples = 0usize;
    let mut correct = 0usize;
    let mut has_visemes = true;
    for (word, viseme, class, multi_hot) in outputs {
        if class >= classes || word.len() != classes {
            return Err(Error::Index { index: class, classes });
        }
        let predicted = argmax(word);
        confusion[class][predicted] += 1;
        correct += (predicted == class) as usize;
        samples += 1;
        match viseme {
            Some(v) => {
                for (k, counts) in label_counts.iter_mut().enumerate() {
                    let pred = ops::sigmoid(v[k]) > 0.5;
                    let truth = multi_hot[k] != 0;
                    match (pred, truth) {
                        (true, true) => counts[0] += 1,
                        (true, false) => counts[1] += 1,
                        (false, true) => counts[2] += 1,
                        (false, false) => {}
                    }
                }
            }
            None => has_visemes = false,
        }
    }
    if samples == 0 {
        return Err(Error::Config("cannot evaluate an empty split".into()));
    }
    Ok(Evaluation {
        samples,
        accuracy: correct as f64 / samples as f64,
        viseme_macro_f1: has_visemes.then(|| macro_f1(&label_counts)),
        confusion,
    })
}

pub fn evaluate(state: &ModelState, config: &ModelConfig, split: &[SampleRecord]) -> Result<Evaluation> {
    let passes = split
        .iter()
        .map(|r| model::model_forward(state, config, &r.features))
        .collect::<Result<Vec<_>>>()?;
    score_outputs(
        config.word_classes,
        passes
            .iter()
            .zip(split)
            .map(|(p, r)| (p.word_logits.as_slice(), p.viseme_logits(), r.word_class, &r.viseme_multihot)),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub mean_total_loss: f64,
    pub mean_word_loss: f64,
    pub mean_viseme_loss: f64,
    /// Rate used by the epoch's last step.
    pub learning_rate: f64,
    pub clean_accuracy: f64,
    pub perturbed_accuracy: f64,
    pub clean_viseme_f1: Option<f64>,
    pub perturbed_viseme_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub total_steps: usize,
    /// Filled in by callers that have a clock; never part of saved reports.
    #[serde(skip)]
    pub wall_clock_seconds: Option<f64>,
}

impl TrainReport {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// Training set plus the two evaluation splits.
#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a> {
    pub train: &'a [&'a SampleRecord],
    pub clean_test: &'a [SampleRecord],
    pub perturbed_test: &'a [SampleRecord],
}

/// Trains `state` for `train_config.epochs` epochs. `on_epoch` sees each
/// record as it is produced.
pub fn train(
    mut state: ModelState,
    model_config: &ModelConfig,
    data: TrainingData<'_>,
    train_config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ModelState, TrainReport)> {
    model_config.validate()?;
    train_config.validate()?;
    if train_config.epochs == 0 {
        return Ok((state, TrainReport::default()));
    }
    if data.train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let batches = data.train.len().div_ceil(train_config.batch_size);
    let total_steps = batches * train_config.epochs;
    let schedule = LrSchedule::new(
        train_config.learning_rate,
        train_config.min_learning_rate,
        total_steps - 1,
    )?;
    let mut adam = AdamState::new(&state.parameters);
    let mut report = TrainReport {
        total_steps,
        ..TrainReport::default()
    };
    let seed = train_config.seed;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut step = 0usize;

    for epoch in 0..train_config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(seed, &[STREAM_EPOCH, epoch as u64]));
        let mut sums = LossParts::default();
        let mut learning_rate = 0.0;
        for (batch_index, chunk) in order.chunks(train_config.batch_size).enumerate() {
            let batch: Vec<Example> = chunk.iter().map(|&i| Example::from(data.train[i])).collect();
            let mut mix_rng = rng::stream(seed, &[STREAM_MIXUP, step as u64]);
            let batch = mixup_batch(&batch, model_config.mixup_alpha, model_config.word_classes, &mut mix_rng)?;

            state.zero_grad();
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = LossParts::default();
            for example in &batch {
                let parts = model::accumulate_example(
                    &mut state,
                    model_config,
                    &example.features,
                    &example.word,
                    &example.visemes,
                    scale,
                )?;
                batch_loss.total += parts.total;
                batch_loss.word += parts.word;
                batch_loss.viseme += parts.viseme;
            }
            if !batch_loss.total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: batch_index,
                    detail: String::from(if batch_loss.word.is_finite() {
                        "viseme loss diverged"
                    } else {
                        "word loss diverged"
                    }),
                });
            }
            learning_rate = optim::cosine_annealed_lr(&schedule, step)?;
            optim::adam_step(&mut adam, &mut state.parameters, learning_rate).map_err(|e| {
                Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: batch_index,
                    detail: format!("{e}"),
                }
            })?;
            sums.total += batch_loss.total * scale;
            sums.word += batch_loss.word * scale;
            sums.viseme += batch_loss.viseme * scale;
            step += 1;
        }
        let clean = evaluate(&state, model_config, data.clean_test)?;
        let perturbed = evaluate(&state, model_config, data.perturbed_test)?;
        let record = EpochRecord {
            epoch: epoch + 1,
            mean_total_loss: sums.total / batches as f64,
            mean_word_loss: sums.word / batches as f64,
            mean_viseme_loss: sums.viseme / batches as f64,
            learning_rate,
            clean_accuracy: clean.accuracy,
            perturbed_accuracy: perturbed.accuracy,
            clean_viseme_f1: clean.viseme_macro_f1,
            perturbed_viseme_f1: perturbed.viseme_macro_f1,
        };
        on_epoch(&record);
        report.epochs.push(record);
    }
    Ok((state, report))
}

#[doc(hidden)]
pub fn random_features(rng: &mut Rng, frames: usize, dim: usize) -> NumericArray {
    let data = (0..frames * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    NumericArray::from_vec(vec![frames, dim], data).expect("length matches shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tafm::TafmConfig;

    fn example(class: usize, frames: usize, fill: f64) -> Example {
        Example {
            features: NumericArray::from_vec(vec![frames, 2], vec![fill; frames * 2]).unwrap(),
            word: WordTarget::Class(class),
            visemes: (0..VISEME_COUNT).map(|k| ((k + class) % 2) as f64).collect(),
        }
    }

    #[test]
    fn mix_endpoints_recover_inputs() {
        let a = example(0, 3, 1.0);
        let b = example(2, 5, -1.0);
        assert_eq!(mix_pair(&a, &b, 1.0, 3).unwrap(), a);
        assert_eq!(mix_pair(&a, &b, 0.0, 3).unwrap(), b);
    }

    #[test]
    fn mix_half_is_the_mean_with_padding() {
        let a = example(0, 3, 1.0);
        let b = example(1, 5, 3.0);
        let m = mix_pair(&a, &b, 0.5, 3).unwrap();
        assert_eq!(m.features.shape(), &[5, 2]);
        assert_eq!(m.features.row(0), &[2.0, 2.0]);
        assert_eq!(m.features.row(4), &[1.5, 1.5]);
        assert_eq!(m.word, WordTarget::Mixed(vec![0.5, 0.5, 0.0]));
        assert!(m.visemes.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn zero_concentration_leaves_batch() {
        let batch = vec![example(0, 3, 1.0), example(1, 4, 2.0)];
        let mut rng = rng::stream(1, &[]);
        assert_eq!(mixup_batch(&batch, 0.0, 3, &mut rng).unwrap(), batch);
        assert!(matches!(mixup_batch(&batch, -0.5, 3, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn mixed_targets_stay_distributions() {
        let batch: Vec<Example> = (0..8).map(|i| example(i % 3, 2 + i, i as f64)).collect();
        let mut rng = rng::stream(9, &[]);
        for m in mixup_batch(&batch, 0.2, 3, &mut rng).unwrap() {
            if let WordTarget::Mixed(q) = &m.word {
                assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            assert!(m.visemes.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn hand_built_evaluation() {
        let targets: [[u8; VISEME_COUNT]; 4] = {
            let mut t = [[0u8; VISEME_COUNT]; 4];
            t[0][0] = 1;
            t[1][0] = 1;
            t[2][1] = 1;
            t[3][1] = 1;
            t
        };
        let word = [
            vec![2.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 3.0],
            vec![1.0, 1.0],
        ];
        let mut vis = vec![vec![-5.0; VISEME_COUNT]; 4];
        vis[0][0] = 5.0; // tp label 0
        vis[1][1] = 5.0; // fn label 0, fp label 1
        vis[2][1] = 5.0; // tp label 1
        // sample 3: fn label 1
        let classes = [0, 0, 1, 1];
        let eval = score_outputs(
            2,
            (0..4).map(|i| (word[i].as_slice(), Some(vis[i].as_slice()), classes[i], &targets[i])),
        )
        .unwrap();
        // predictions 0,1,1,0 (tie goes to the first class)
        assert_eq!(eval.accuracy, 0.5);
        assert_eq!(eval.confusion, vec![vec![1, 1], vec![1, 1]]);
        // label 0: tp1 fn1 → 2/3; label 1: tp1 fp1 fn1 → 1/2; others 0
        let expected = (2.0 / 3.0 + 0.5) / VISEME_COUNT as f64;
        assert!((eval.viseme_macro_f1.unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn accuracy_extremes() {
        let hot = [0u8; VISEME_COUNT];
        let right = score_outputs(2, [([1.0, 0.0].as_slice(), None, 0, &hot)]).unwrap();
        assert_eq!(right.accuracy, 1.0);
        assert_eq!(right.viseme_macro_f1, None);
        let wrong = score_outputs(2, [([0.0, 1.0].as_slice(), None, 0, &hot), ([0.0, 1.0].as_slice(), None, 0, &hot)]).unwrap();
        assert_eq!(wrong.accuracy, 0.0);
        assert!(score_outputs(2, core::iter::empty()).is_err());
    }

    fn tiny_records(n: usize) -> Vec<SampleRecord> {
        let mut rng = rng::stream(3, &[]);
        (0..n)
            .map(|i| SampleRecord {
                features: random_features(&mut rng, 3 + i % 3, 4),
                word_class: i % 3,
                viseme_multihot: {
                    let mut m = [0u8; VISEME_COUNT];
                    m[i % 3] = 1;
                    m[5] = 1;
                    m
                },
                speaker_id: 0,
                perturbed: false,
            })
            .collect()
    }

    fn tiny_model() -> ModelConfig {
        ModelConfig {
            input_dim: 4,
            hidden_dim: 6,
            word_classes: 3,
            tafm: TafmConfig::finite(5.0, 0.1),
            ..ModelConfig::default()
        }
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let records = tiny_records(6);
        let refs: Vec<&SampleRecord> = records.iter().collect();
        let cfg = tiny_model();
        let state = ModelState::init(&cfg, 1).unwrap();
        let data = TrainingData {
            train: &refs,
            clean_test: &records,
            perturbed_test: &records,
        };
        let tc = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let (after, report) = train(state.clone(), &cfg, data, &tc, |_| {}).unwrap();
        assert_eq!(after, state);
        assert!(report.epochs.is_empty());
    }

    #[test]
    fn training_is_deterministic_and_ends_at_the_minimum_rate() {
        let records = tiny_records(10);
        let refs: Vec<&SampleRecord> = records.iter().collect();
        let cfg = tiny_model();
        let data = TrainingData {
            train: &refs,
            clean_test: &records,
            perturbed_test: &records,
        };
        let tc = TrainConfig {
            epochs: 3,
            batch_size: 4,
            learning_rate: 1e-2,
            min_learning_rate: 1e-4,
            ..TrainConfig::default()
        };
        let run = || train(ModelState::init(&cfg, 4).unwrap(), &cfg, data, &tc, |_| {}).unwrap();
        let (s1, r1) = run();
        let (s2, r2) = run();
        assert_eq!(s1, s2);
        assert_eq!(r1, r2);
        assert_eq!(r1.total_steps, 9);
        assert!((r1.last().unwrap().learning_rate - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn evaluation_ignores_order() {
        let mut records = tiny_records(9);
        let cfg = tiny_model();
        let state = ModelState::init(&cfg, 2).unwrap();
        let a = evaluate(&state, &cfg, &records).unwrap();
        records.reverse();
        assert_eq!(evaluate(&state, &cfg, &records).unwrap(), a);
    }
}
