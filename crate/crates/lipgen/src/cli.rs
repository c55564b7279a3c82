//! `lipgen` subcommands. [`run`] parses arguments, dispatches, and maps
//! every outcome to an exit code; it never panics on bad input.

use std::ffi::OsString;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lipgen_core::corpus::SplitKind;
use lipgen_core::diagnostics::{self, SuiteOptions};
use lipgen_core::lexicon::{self as core_lexicon, VariantPolicy};

use crate::ablation;
use crate::checkpoint;
use crate::config::{self, ExperimentConfig};
use crate::corpus_files;
use crate::error::{Error, Result, EXIT_OK, EXIT_USAGE};
use crate::experiment::{self, RunMetadata};
use crate::io;
use crate::lexicon::{self, LabelRecord};
use crate::report::{self, EvalReportFile, SplitEvaluation};

#[derive(Debug, Parser)]
#[command(name = "lipgen", version, about = "Viseme-guided lip-reading experiments on synthetic corpora")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Map words to viseme sequences and 18-dim multi-hot labels (JSON lines).
    Lexicon(LexiconArgs),
    /// Write the four corpus splits and their manifest.
    Generate(ConfigArgs),
    /// Train one model; writes a checkpoint and a train report.
    Train(ConfigArgs),
    /// Evaluate a checkpoint on corpus splits.
    Eval(EvalArgs),
    /// Train every ablation variant over the seed list and tabulate medians.
    Ablate(ConfigArgs),
    /// Compare every analytic gradient with central differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    First,
    All,
}

impl From<PolicyArg> for VariantPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::First => VariantPolicy::First,
            PolicyArg::All => VariantPolicy::All,
        }
    }
}

#[derive(Debug, Args)]
pub struct LexiconArgs {
    /// Words to map.
    pub words: Vec<String>,
    /// File of whitespace-separated words (`-` for stdin).
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// Map every word of the dictionary.
    #[arg(long, conflicts_with_all = ["words", "input"])]
    pub all_words: bool,
    /// Pronouncing dictionary (default: the bundled CMU dictionary).
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    /// Viseme table (default: the bundled 18-group table).
    #[arg(long)]
    pub viseme_table: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "first")]
    pub variant_policy: PolicyArg,
    /// Fail if any word cannot be mapped.
    #[arg(long)]
    pub strict: bool,
    /// Output file (default: stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Experiment config (JSON); built-in defaults when absent.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Config overrides: `--model.tafm.lambda 0.1`, `--train.epochs=5`, or
    /// the aliases `--lambda`, `--beta`, `--gamma`, `--seed`, `--epochs`.
    #[arg(
        value_name = "OVERRIDES",
        trailing_var_arg = true,
        allow_hyphen_values = true,
        num_args = 0..
    )]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let overrides = config::parse_overrides(&self.overrides)?;
        ExperimentConfig::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint to evaluate (default: `paths.checkpoint`).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Splits to evaluate (repeatable; default: clean_test and perturbed_test).
    #[arg(long = "split")]
    pub splits: Vec<SplitKind>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Maximum accepted relative error.
    #[arg(long, default_value_t = diagnostics::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Perturb the analytic gradient of one check (detector self-test).
    #[arg(long, value_name = "CHECK")]
    pub inject_fault: Option<String>,
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Lexicon(args) => cmd_lexicon(&args, out, err),
        Command::Generate(args) => cmd_generate(&args.load()?, out),
        Command::Train(args) => cmd_train(&args.load()?, out, err),
        Command::Eval(args) => cmd_eval(&args, out),
        Command::Ablate(args) => cmd_ablate(&args.load()?, out, err),
        Command::Gradcheck(args) => cmd_gradcheck(&args, out),
    }
}

fn stdout_error(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn read_words(args: &LexiconArgs) -> Result<Vec<String>> {
    let mut words = args.words.clone();
    if let Some(path) = &args.input {
        let text = if path.as_os_str() == "-" {
            let mut bytes = Vec::new();
            std::io::Read::read_to_end(&mut std::io::stdin(), &mut bytes).map_err(|e| Error::io("<stdin>", e))?;
            io::decode_text(bytes)
        } else {
            io::read_text(path)?
        };
        words.extend(text.split_whitespace().map(str::to_owned));
    }
    Ok(words)
}

pub fn cmd_lexicon(args: &LexiconArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let table = lexicon::load_viseme_table(args.viseme_table.as_deref())?;
    let lex = lexicon::load_lexicon(args.dictionary.as_deref())?;
    let words = if args.all_words {
        lex.iter().map(|(w, _)| w.to_owned()).collect()
    } else {
        read_words(args)?
    };
    let policy = VariantPolicy::from(args.variant_policy);

    let mut records = Vec::with_capacity(words.len());
    let mut failures = 0usize;
    for word in &words {
        match core_lexicon::word_to_multihot(&table, &lex, word, policy) {
            Ok(label) => records.push(LabelRecord::from(&label)),
            Err(e) => {
                failures += 1;
                writeln!(err, "{word}: {e}").map_err(|e| Error::io("<stderr>", e))?;
            }
        }
    }

    match &args.output {
        Some(path) => {
            let mut bytes = Vec::new();
            lexicon::write_jsonl(&mut bytes, &records).expect("in-memory write");
            io::write_atomic(path, &bytes)?;
        }
        None => {
            let mut w = BufWriter::new(&mut *out);
            lexicon::write_jsonl(&mut w, &records).map_err(stdout_error)?;
            w.flush().map_err(stdout_error)?;
        }
    }
    if failures > 0 && args.strict {
        return Err(Error::Runtime(format!("{failures} of {} words could not be mapped", words.len())));
    }
    Ok(EXIT_OK)
}

pub fn cmd_generate(config: &ExperimentConfig, out: &mut dyn Write) -> Result<i32> {
    let (corpus, table) = experiment::generate_corpus(config)?;
    let manifest = corpus_files::write_corpus(&config.paths.corpus_dir, &corpus, &table)?;
    for entry in &manifest.splits {
        writeln!(
            out,
            "{}: {} records ({})",
            entry.split,
            entry.records,
            config.paths.corpus_dir.join(&entry.file).display()
        )
        .map_err(stdout_error)?;
    }
    writeln!(out, "manifest: {}", corpus_files::manifest_path(&config.paths.corpus_dir).display())
        .map_err(stdout_error)?;
    Ok(EXIT_OK)
}

pub fn cmd_train(config: &ExperimentConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let corpus = experiment::load_corpus(config)?;
    let (state, train_report) = experiment::train_model(config, &corpus, |r| {
        let _ = writeln!(
            err,
            "epoch {:>3}  loss {:.4}  lr {:.2e}  clean {:.4}  perturbed {:.4}",
            r.epoch, r.mean_total_loss, r.learning_rate, r.clean_accuracy, r.perturbed_accuracy
        );
    })?;
    checkpoint::save_checkpoint(&config.paths.checkpoint, &state, &config.model)?;
    let meta = RunMetadata::new(config);
    let [json, csv] = report::write_train_report(&config.paths.report_dir, &meta, &train_report)?;
    let (clean, perturbed) = train_report
        .last()
        .map_or((f64::NAN, f64::NAN), |r| (r.clean_accuracy, r.perturbed_accuracy));
    writeln!(out, "clean_accuracy {clean}\nperturbed_accuracy {perturbed}").map_err(stdout_error)?;
    writeln!(
        out,
        "checkpoint {}\nreport {}\nreport {}",
        config.paths.checkpoint.display(),
        json.display(),
        csv.display()
    )
    .map_err(stdout_error)?;
    Ok(EXIT_OK)
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let config = args.config.load()?;
    let path = args.checkpoint.clone().unwrap_or_else(|| config.paths.checkpoint.clone());
    let (state, model) = checkpoint::load_checkpoint(&path)?;
    if model.input_dim != config.corpus.feature_dim || model.word_classes != config.corpus.num_classes {
        return Err(Error::Config(format!(
            "checkpoint {} expects {}-dim features and {} classes; the corpus has {} and {}",
            path.display(),
            model.input_dim,
            model.word_classes,
            config.corpus.feature_dim,
            config.corpus.num_classes
        )));
    }
    let corpus = experiment::load_corpus(&config)?;
    let splits = if args.splits.is_empty() {
        vec![SplitKind::CleanTest, SplitKind::PerturbedTest]
    } else {
        args.splits.clone()
    };
    let mut evaluated = Vec::with_capacity(splits.len());
    for split in splits {
        let evaluation = experiment::evaluate_split(&state, &model, &corpus, split)?;
        writeln!(
            out,
            "{split}: accuracy {} viseme_macro_f1 {}",
            evaluation.accuracy,
            evaluation.viseme_macro_f1.map_or("n/a".to_owned(), |f| f.to_string())
        )
        .map_err(stdout_error)?;
        evaluated.push(SplitEvaluation {
            split: split.name().to_owned(),
            evaluation,
        });
    }
    let file = EvalReportFile {
        metadata: RunMetadata::new(&config),
        checkpoint: path.display().to_string(),
        splits: evaluated,
    };
    let report_path = config.paths.report_dir.join("eval_report.json");
    report::write_eval_report(&report_path, &file)?;
    writeln!(out, "report {}", report_path.display()).map_err(stdout_error)?;
    Ok(EXIT_OK)
}

pub fn cmd_ablate(config: &ExperimentConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let corpus = experiment::load_or_generate_corpus(config)?;
    let variants = ablation::standard_variants(config);
    let runs_dir = config.paths.report_dir.join("ablation");
    let table = ablation::run_ablation(config, &corpus, &variants, Some(&runs_dir), |variant, seed, r| {
        if let Some(last) = r.last() {
            let _ = writeln!(
                err,
                "{variant} seed {seed}: clean {:.4} perturbed {:.4}",
                last.clean_accuracy, last.perturbed_accuracy
            );
        }
    })?;
    ablation::write_table(&config.paths.report_dir, &table)?;
    out.write_all(ablation::render(&table).as_bytes()).map_err(stdout_error)?;
    writeln!(out, "table {}", config.paths.report_dir.join("ablation.csv").display()).map_err(stdout_error)?;
    Ok(EXIT_OK)
}

pub fn cmd_gradcheck(args: &GradcheckArgs, out: &mut dyn Write) -> Result<i32> {
    if let Some(name) = &args.inject_fault {
        if !diagnostics::check_names().any(|n| n == name) {
            return Err(Error::Usage(format!(
                "unknown check `{name}`; known: {}",
                diagnostics::check_names().collect::<Vec<_>>().join(", ")
            )));
        }
    }
    let results = diagnostics::run_suite(&SuiteOptions {
        tolerance: Some(args.tolerance),
        inject_fault: args.inject_fault.clone(),
        seed: args.seed,
    })?;
    let mut failed = Vec::new();
    for r in &results {
        let verdict = if r.passed() { "ok" } else { "FAIL" };
        writeln!(out, "{:<22} max_rel_err {:.3e}  {verdict}", r.name, r.report.max_relative_error())
            .map_err(stdout_error)?;
        if !r.passed() {
            failed.push(r.name);
        }
    }
    writeln!(out, "{} checks, {} failed (tolerance {:e})", results.len(), failed.len(), args.tolerance)
        .map_err(stdout_error)?;
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        Err(Error::Check(failed.join(", ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn parse(list: &[&str]) -> Cli {
        Cli::try_parse_from(list).unwrap()
    }

    #[test]
    fn trailing_overrides_are_captured() {
        let cli = parse(&["lipgen", "train", "--config", "c.json", "--model.tafm.lambda", "0.1", "--beta=0"]);
        let Command::Train(args) = cli.command else { panic!("train") };
        assert_eq!(args.config.as_deref(), Some(Path::new("c.json")));
        assert_eq!(args.overrides, ["--model.tafm.lambda", "0.1", "--beta=0"]);
    }

    #[test]
    fn eval_takes_splits_and_overrides() {
        let cli = parse(&["lipgen", "eval", "--split", "clean_test", "--seed", "3"]);
        let Command::Eval(args) = cli.command else { panic!("eval") };
        assert_eq!(args.splits, [SplitKind::CleanTest]);
        assert_eq!(args.config.overrides, ["--seed", "3"]);
    }

    #[test]
    fn usage_errors_exit_one() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["lipgen", "frobnicate"], &mut out, &mut err), EXIT_USAGE);
        assert_eq!(run(["lipgen", "train", "--nonexistent.key", "1"], &mut out, &mut err), EXIT_USAGE);
        assert_eq!(run(["lipgen", "--help"], &mut out, &mut err), EXIT_OK);
    }
}
