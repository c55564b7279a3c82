//! The variant × seed ablation harness and its median table.
//!
//! Variants are cumulative: the baseline trains an average-pooling word
//! classifier on `clean_train` alone; `+synthetic` adds `diverse_train`;
//! `+viseme-label` switches on the auxiliary loss; `+TAFM(lambda=…)` adds
//! attention fusion for each λ of the grid.

use std::path::Path;

use lipgen_core::corpus::SplitKind;
use lipgen_core::train::TrainReport;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Override};
use crate::corpus_files::Corpus;
use crate::error::Result;
use crate::experiment::{self, RunMetadata};
use crate::io;
use crate::report;

pub const LAMBDA_GRID: [f64; 3] = [0.05, 0.1, 0.2];

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub overrides: Vec<Override>,
}

fn splits(kinds: &[SplitKind]) -> Value {
    serde_json::to_value(kinds).expect("split kinds serialize")
}

/// The standard variants. `+viseme-label` and `+TAFM` use the configured β
/// (1.0 when the config switches the auxiliary loss off) and γ.
pub fn standard_variants(base: &ExperimentConfig) -> Vec<Variant> {
    let clean = splits(&[SplitKind::CleanTrain]);
    let both = splits(&[SplitKind::CleanTrain, SplitKind::DiverseTrain]);
    let beta = json!(if base.model.beta > 0.0 { base.model.beta } else { 1.0 });
    let mut variants = vec![
        Variant {
            name: "baseline".into(),
            overrides: vec![
                Override::new("train.train_splits", clean),
                Override::new("model.beta", json!(0.0)),
                Override::new("model.tafm.lambda", json!(0.0)),
            ],
        },
        Variant {
            name: "+synthetic".into(),
            overrides: vec![
                Override::new("train.train_splits", both.clone()),
                Override::new("model.beta", json!(0.0)),
                Override::new("model.tafm.lambda", json!(0.0)),
            ],
        },
        Variant {
            name: "+viseme-label".into(),
            overrides: vec![
                Override::new("train.train_splits", both.clone()),
                Override::new("model.beta", beta.clone()),
                Override::new("model.tafm.lambda", json!(0.0)),
            ],
        },
    ];
    for lambda in LAMBDA_GRID {
        variants.push(Variant {
            name: format!("+TAFM(lambda={lambda})"),
            overrides: vec![
                Override::new("train.train_splits", both.clone()),
                Override::new("model.beta", beta.clone()),
                Override::new("model.tafm.lambda", json!(lambda)),
            ],
        });
    }
    variants
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub clean_accuracy: f64,
    pub perturbed_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n == 0 {
            f64::NAN
        } else if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Self {
            median,
            min: sorted.first().copied().unwrap_or(f64::NAN),
            max: sorted.last().copied().unwrap_or(f64::NAN),
        }
    }

    pub fn spread(&self) -> f64 {
        self.max - self.min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    /// Hash of the variant's effective config (seed excluded: it is the
    /// train seed of the base config).
    pub config_hash: String,
    pub seeds: Vec<SeedResult>,
    pub clean: Summary,
    pub perturbed: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub tool_version: String,
    pub config_hash: String,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, variant: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }
}

/// Config of one variant at one seed.
pub fn variant_config(base: &ExperimentConfig, variant: &Variant, seed: u64) -> Result<ExperimentConfig> {
    let mut overrides = variant.overrides.clone();
    overrides.push(Override::new("train.seed", json!(seed)));
    let config = base.with_overrides(&overrides)?;
    config.validate()?;
    Ok(config)
}

/// Trains every variant at every seed of `base.seeds`. `on_run` sees each
/// finished run; when `run_dir` is set each run's report goes to
/// `run_dir/<variant>/seed-<seed>/`.
pub fn run_ablation(
    base: &ExperimentConfig,
    corpus: &Corpus,
    variants: &[Variant],
    run_dir: Option<&Path>,
    mut on_run: impl FnMut(&str, u64, &TrainReport),
) -> Result<AblationTable> {
    let mut rows = Vec::with_capacity(variants.len());
    for variant in variants {
        let mut seeds = Vec::with_capacity(base.seeds.len());
        let mut hash = String::new();
        for &seed in &base.seeds {
            let config = variant_config(base, variant, seed)?;
            let (_, train_report) = experiment::train_model(&config, corpus, |_| {})?;
            if let Some(dir) = run_dir {
                let out = dir.join(slug(&variant.name)).join(format!("seed-{seed}"));
                report::write_train_report(&out, &RunMetadata::new(&config), &train_report)?;
            }
            let last = train_report.last().expect("at least one epoch");
            seeds.push(SeedResult {
                seed,
                clean_accuracy: last.clean_accuracy,
                perturbed_accuracy: last.perturbed_accuracy,
            });
            on_run(&variant.name, seed, &train_report);
            hash = config.with_overrides(&[Override::new("train.seed", json!(base.train.seed))])?.hash();
        }
        let clean: Vec<f64> = seeds.iter().map(|s| s.clean_accuracy).collect();
        let perturbed: Vec<f64> = seeds.iter().map(|s| s.perturbed_accuracy).collect();
        rows.push(AblationRow {
            variant: variant.name.clone(),
            config_hash: hash,
            clean: Summary::of(&clean),
            perturbed: Summary::of(&perturbed),
            seeds,
        });
    }
    Ok(AblationTable {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: base.hash(),
        rows,
    })
}

/// File-system friendly variant name.
pub fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect::<String>()
        .trim_matches('_')
        .to_owned()
}

#[derive(Serialize)]
struct TableRow<'a> {
    variant: &'a str,
    config_hash: &'a str,
    tool_version: &'a str,
    seeds: usize,
    clean_median: f64,
    clean_min: f64,
    clean_max: f64,
    perturbed_median: f64,
    perturbed_min: f64,
    perturbed_max: f64,
    /// `seed:clean/perturbed` pairs separated by spaces.
    per_seed: String,
}

pub fn table_csv(table: &AblationTable) -> Vec<u8> {
    report::csv_bytes(table.rows.iter().map(|r| TableRow {
        variant: &r.variant,
        config_hash: &r.config_hash,
        tool_version: &table.tool_version,
        seeds: r.seeds.len(),
        clean_median: r.clean.median,
        clean_min: r.clean.min,
        clean_max: r.clean.max,
        perturbed_median: r.perturbed.median,
        perturbed_min: r.perturbed.min,
        perturbed_max: r.perturbed.max,
        per_seed: r
            .seeds
            .iter()
            .map(|s| format!("{}:{}/{}", s.seed, s.clean_accuracy, s.perturbed_accuracy))
            .collect::<Vec<_>>()
            .join(" "),
    }))
}

/// Writes `ablation.json` and `ablation.csv` into `dir`.
pub fn write_table(dir: &Path, table: &AblationTable) -> Result<()> {
    io::write_json(&dir.join("ablation.json"), table)?;
    io::write_atomic(&dir.join("ablation.csv"), &table_csv(table))
}

/// Plain-text rendering for the terminal.
pub fn render(table: &AblationTable) -> String {
    let mut out = format!(
        "{:<22} {:>6} {:>22} {:>22}\n",
        "variant", "seeds", "clean median [min,max]", "perturbed median [min,max]"
    );
    for r in &table.rows {
        out.push_str(&format!(
            "{:<22} {:>6} {:>8.4} [{:.3},{:.3}] {:>8.4} [{:.3},{:.3}]\n",
            r.variant,
            r.seeds.len(),
            r.clean.median,
            r.clean.min,
            r.clean.max,
            r.perturbed.median,
            r.perturbed.min,
            r.perturbed.max
        ));
    }
    out
}
