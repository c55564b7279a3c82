use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &[&str] = &["--corpus.num_classes", "6", "--model.word_classes", "6", "--epochs", "2"];

fn lipgen(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lipgen"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn with_small<'a>(command: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![command];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    args
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn lexicon_homophenes() {
    let dir = tempfile::tempdir().unwrap();
    let o = lipgen(dir.path(), &["lexicon", "bet", "bat", "choke", "joke"]);
    assert!(o.status.success());
    let rows: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["word"], "BET");
    assert_eq!(rows[0]["visemes"], rows[1]["visemes"]);
    assert_eq!(rows[0]["multi_hot"], rows[1]["multi_hot"]);
    assert_eq!(rows[2]["visemes"], rows[3]["visemes"]);
    assert_ne!(rows[0]["phonemes"], rows[1]["phonemes"]);
}

#[test]
fn lexicon_empty_input_and_oov() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.txt"), "").unwrap();
    let o = lipgen(dir.path(), &["lexicon", "--input", "empty.txt"]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());

    let lenient = lipgen(dir.path(), &["lexicon", "bet", "qqxzv"]);
    assert!(lenient.status.success());
    assert_eq!(stdout(&lenient).lines().count(), 1);
    assert!(String::from_utf8_lossy(&lenient.stderr).contains("QQXZV"));

    let strict = lipgen(dir.path(), &["lexicon", "--strict", "bet", "qqxzv"]);
    assert_eq!(strict.status.code(), Some(2));
}

#[test]
fn generate_is_deterministic_and_validated() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        assert!(lipgen(dir.path(), &with_small("generate", &[])).status.success());
    }
    let names: Vec<_> = std::fs::read_dir(a.path().join("corpus")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(!names.is_empty());
    for name in names {
        let x = std::fs::read(a.path().join("corpus").join(&name)).unwrap();
        let y = std::fs::read(b.path().join("corpus").join(&name)).unwrap();
        assert!(x == y, "{name:?} differs");
    }

    let bad = lipgen(a.path(), &["generate", "--corpus.splits.clean_train", "0", "--corpus.splits.diverse_train", "0"]);
    assert_eq!(bad.status.code(), Some(1), "{}", String::from_utf8_lossy(&bad.stderr));
    let unknown = lipgen(a.path(), &["generate", "--corpus.no_such_key", "1"]);
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn train_writes_artifacts_and_eval_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let missing = lipgen(dir.path(), &with_small("train", &[]));
    assert_eq!(missing.status.code(), Some(2));

    assert!(lipgen(dir.path(), &with_small("generate", &[])).status.success());
    let o = lipgen(dir.path(), &with_small("train", &[]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("clean_accuracy "));
    let report = read_json(dir.path().join("reports/train_report.json"));
    assert_eq!(report["epochs"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("model.ckpt.json").exists());

    // Command flags precede the trailing config overrides.
    let mut eval_args = vec!["eval", "--split", "clean_test"];
    eval_args.extend_from_slice(SMALL);
    let e = lipgen(dir.path(), &eval_args);
    assert!(e.status.success(), "{}", String::from_utf8_lossy(&e.stderr));
    let eval = read_json(dir.path().join("reports/eval_report.json"));
    let last = report["epochs"].as_array().unwrap().last().unwrap().clone();
    assert_eq!(eval["splits"][0]["split"], "clean_test");
    assert_eq!(eval["splits"][0]["accuracy"], last["clean_accuracy"]);

    let ckpt = std::fs::read(dir.path().join("model.ckpt.json")).unwrap();
    assert!(lipgen(dir.path(), &with_small("train", &[])).status.success());
    assert_eq!(ckpt, std::fs::read(dir.path().join("model.ckpt.json")).unwrap());

    let mismatch = lipgen(dir.path(), &["eval", "--model.word_classes", "7", "--corpus.num_classes", "7"]);
    assert_ne!(mismatch.status.code(), Some(0));
}

#[test]
fn ablation_baseline_matches_plain_training() {
    let dir = tempfile::tempdir().unwrap();
    let o = lipgen(dir.path(), &with_small("ablate", &["--seeds", "[3]"]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = read_json(dir.path().join("reports/ablation.json"));
    let rows = table["rows"].as_array().unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r["variant"].as_str().unwrap()).collect();
    assert_eq!(
        names,
        [
            "baseline",
            "+synthetic",
            "+viseme-label",
            "+TAFM(lambda=0.05)",
            "+TAFM(lambda=0.1)",
            "+TAFM(lambda=0.2)"
        ]
    );
    for row in rows {
        assert_eq!(row["seeds"][0]["seed"], 3);
    }
    let csv = std::fs::read_to_string(dir.path().join("reports/ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + rows.len());

    let plain = lipgen(
        dir.path(),
        &with_small(
            "train",
            &[
                "--seed",
                "3",
                "--lambda",
                "0",
                "--beta",
                "0",
                "--train.train_splits",
                r#"["clean_train"]"#,
            ],
        ),
    );
    assert!(plain.status.success(), "{}", String::from_utf8_lossy(&plain.stderr));
    let trained = read_json(dir.path().join("reports/train_report.json"));
    let ablated = read_json(dir.path().join("reports/ablation/baseline/seed-3/train_report.json"));
    assert_eq!(trained["epochs"], ablated["epochs"]);
    let last = trained["epochs"].as_array().unwrap().last().unwrap();
    assert_eq!(rows[0]["seeds"][0]["perturbed_accuracy"], last["perturbed_accuracy"]);
}

#[test]
fn gradcheck_reports_injected_faults() {
    let dir = tempfile::tempdir().unwrap();
    let ok = lipgen(dir.path(), &["gradcheck"]);
    assert!(ok.status.success());
    let checks = stdout(&ok).lines().filter(|l| l.contains("max_rel_err")).count();
    assert!(checks >= 10);

    let bad = lipgen(dir.path(), &["gradcheck", "--inject-fault", "total_loss"]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(stdout(&bad).lines().any(|l| l.starts_with("total_loss") && l.ends_with("FAIL")));

    let unknown = lipgen(dir.path(), &["gradcheck", "--inject-fault", "nope"]);
    assert_eq!(unknown.status.code(), Some(1));
}
