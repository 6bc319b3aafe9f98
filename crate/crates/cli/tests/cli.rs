//! End-to-end tests of the `cvt` binary: exit codes, config precedence,
//! manifests, tagging, scoring, and the cost report.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cli::toygen;
use corpus::LabeledSentence;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cvt"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn write_conll(path: &Path, sentences: &[LabeledSentence]) {
    let mut text = String::new();
    for s in sentences {
        for (tok, tag) in s.tokens.iter().zip(&s.tags) {
            text.push_str(&format!("{tok} {tag}\n"));
        }
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

/// Tiny corpus + config that trains in well under a second.
fn tiny_setup(dir: &Path, seed_extra: &serde_json::Value) -> PathBuf {
    let task = toygen::generate(7, 20, 40, 10);
    write_conll(&dir.join("train.conll"), &task.labeled);
    write_conll(&dir.join("valid.conll"), &task.test);
    let mut unlabeled = String::new();
    for s in &task.unlabeled {
        unlabeled.push_str(&s.tokens.join(" "));
        unlabeled.push('\n');
    }
    fs::write(dir.join("unlabeled.txt"), unlabeled).unwrap();

    let mut cfg = serde_json::json!({
        "labeled": dir.join("train.conll"),
        "validation": dir.join("valid.conll"),
        "unlabeled": dir.join("unlabeled.txt"),
        "output_dir": dir.join("run"),
        "train": {
            "max_steps": 12,
            "batch_size_labeled": 8,
            "batch_size_unlabeled": 8,
            "eval_every_steps": 6,
            "base_lr": 0.2,
            "encoder": {
                "word_dim": 8,
                "char_emb_dim": 4,
                "char_filter_widths": [2],
                "char_filters": 4,
                "lstm1_size": 6,
                "lstm2_size": 6,
                "projection_size": 6
            }
        }
    });
    if let serde_json::Value::Object(extra) = seed_extra {
        for (k, v) in extra {
            cfg["train"][k] = v.clone();
        }
    }
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn help_and_version_exit_zero() {
    let out = run(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("train"));
    let out = run(&["train", "--help"]);
    assert_eq!(code(&out), 0);
    let out = run(&["--version"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = run(&["--frobnicate"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn unknown_config_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    fs::write(&path, r#"{"labelled": "typo.conll"}"#).unwrap();
    let out = run(&["preprocess", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stderr(&out).contains("labelled"), "{}", stderr(&out));
}

#[test]
fn bad_set_value_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_setup(dir.path(), &serde_json::json!({}));
    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "max_steps=banana",
    ]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn missing_labeled_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_setup(dir.path(), &serde_json::json!({}));
    fs::remove_file(dir.path().join("train.conll")).unwrap();
    let out = run(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("train.conll"), "{}", stderr(&out));
}

#[test]
fn set_flag_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_setup(dir.path(), &serde_json::json!({}));
    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "base_lr=0.05",
        "--set",
        "train.max_steps=4",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/manifest.json")).unwrap())
            .unwrap();
    // bare keys get the train. prefix; dotted keys pass through
    assert_eq!(manifest["config"]["train"]["base_lr"], 0.05);
    assert_eq!(manifest["config"]["train"]["max_steps"], 4);
    assert!(stdout(&out).contains("trained 4 steps"), "{}", stdout(&out));
}

#[test]
fn supervised_only_never_reads_unlabeled() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_setup(dir.path(), &serde_json::json!({"mode": "supervised_only"}));
    // If the mode tried to open this, the run would fail with exit 2.
    fs::remove_file(dir.path().join("unlabeled.txt")).unwrap();
    let out = run(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(
        stdout(&out).contains("(supervised_only)"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn manifests_identical_up_to_timestamps() {
    let strip = |dir: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join("run/manifest.json")).unwrap())
                .unwrap();
        let obj = v.as_object_mut().unwrap();
        assert!(obj.remove("started").is_some());
        assert!(obj.remove("finished").is_some());
        v
    };
    let dir_a = tempfile::tempdir().unwrap();
    let cfg = tiny_setup(dir_a.path(), &serde_json::json!({}));
    assert_eq!(code(&run(&["train", "--config", cfg.to_str().unwrap()])), 0);
    let mut a = strip(dir_a.path());

    let dir_b = tempfile::tempdir().unwrap();
    let cfg = tiny_setup(dir_b.path(), &serde_json::json!({}));
    assert_eq!(code(&run(&["train", "--config", cfg.to_str().unwrap()])), 0);
    let mut b = strip(dir_b.path());

    // Input paths differ by tempdir; digests and everything else must not.
    for v in [&mut a, &mut b] {
        for input in v["inputs"].as_array_mut().unwrap() {
            input.as_object_mut().unwrap().remove("path");
        }
        v.as_object_mut().unwrap().remove("config");
    }
    assert_eq!(a, b);
}

fn parse_tagged(text: &str) -> Vec<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for line in text.lines() {
        if line.is_empty() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else {
            let (tok, tag) = line.split_once(' ').expect("token tag");
            cur.push((tok.to_string(), tag.to_string()));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn assert_valid_iob2(sentences: &[Vec<(String, String)>]) {
    for s in sentences {
        let mut prev: Option<&str> = None;
        for (_, tag) in s {
            if let Some(label) = tag.strip_prefix("I-") {
                let ok = matches!(prev, Some(p) if p == format!("B-{label}") || p == format!("I-{label}"));
                assert!(ok, "dangling {tag} in {s:?}");
            } else {
                assert!(
                    tag == "O" || tag.starts_with("B-"),
                    "bad tag {tag} in {s:?}"
                );
            }
            prev = Some(tag);
        }
    }
}

#[test]
fn tag_is_idempotent_and_valid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_setup(dir.path(), &serde_json::json!({}));
    assert_eq!(code(&run(&["train", "--config", cfg.to_str().unwrap()])), 0);
    let ckpt = dir.path().join("run/final");

    let input = dir.path().join("to_tag.txt");
    fs::write(&input, "mr badoan went to riluburg\n\nveto spoke\n").unwrap();
    let out = run(&[
        "tag",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let first = parse_tagged(&stdout(&out));
    assert_eq!(first.len(), 2);
    assert_eq!(first[0].len(), 5);
    assert_valid_iob2(&first);

    // Tagging the tokens of the output again must reproduce it.
    let again = dir.path().join("again.txt");
    let tokens: String = first
        .iter()
        .map(|s| {
            s.iter()
                .map(|(t, _)| t.as_str())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(&again, format!("{tokens}\n")).unwrap();
    let out2 = run(&[
        "tag",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--input",
        again.to_str().unwrap(),
    ]);
    assert_eq!(code(&out2), 0);
    assert_eq!(parse_tagged(&stdout(&out2)), first);

    // Empty input: exit 0, no output.
    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    let out3 = run(&[
        "tag",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--input",
        empty.to_str().unwrap(),
    ]);
    assert_eq!(code(&out3), 0, "{}", stderr(&out3));
    assert!(stdout(&out3).is_empty());
}

#[test]
fn eval_matches_reference_values() {
    let pred = fixture("scorer_pred.conll");
    let gold = fixture("scorer_gold.conll");
    let out = run(&[
        "eval",
        "--pred",
        pred.to_str().unwrap(),
        "--gold",
        gold.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(
        text.contains("found: 25 phrases; correct: 18"),
        "{text}"
    );
    assert!(
        text.contains("precision:  72.00%; recall:  75.00%; FB1:  73.47"),
        "{text}"
    );
    assert!(
        text.contains("LOC: precision:  75.00%; recall:  75.00%; FB1:  75.00"),
        "{text}"
    );
    assert!(
        text.contains("OTE: precision:  80.00%; recall:  66.67%; FB1:  72.73"),
        "{text}"
    );
    assert!(
        text.contains("PER: precision:  66.67%; recall:  80.00%; FB1:  72.73"),
        "{text}"
    );
}

#[test]
fn eval_rejects_mismatched_files() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.conll");
    fs::write(&pred, "only O\n\n").unwrap();
    let out = run(&[
        "eval",
        "--pred",
        pred.to_str().unwrap(),
        "--gold",
        fixture("scorer_gold.conll").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("sentences"), "{}", stderr(&out));
}

#[test]
fn eval_runs_aggregate_and_significance() {
    let dir = tempfile::tempdir().unwrap();
    let gold = fixture("scorer_gold.conll");
    let pred_full = fs::read_to_string(fixture("scorer_pred.conll")).unwrap();
    // A weaker variant: drop one correct PER prediction.
    let pred_weak = pred_full.replacen("maria B-PER\nlopez I-PER", "maria O\nlopez O", 1);

    let report = |name: &str, text: &str| -> PathBuf {
        let pred = dir.path().join(format!("{name}.conll"));
        fs::write(&pred, text).unwrap();
        let json = dir.path().join(format!("{name}.json"));
        let out = run(&[
            "eval",
            "--pred",
            pred.to_str().unwrap(),
            "--gold",
            gold.to_str().unwrap(),
            "--report",
            json.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        json
    };
    let a = report("a", &pred_full);
    let b = report("b", &pred_weak);
    let runs = format!("{},{}", a.display(), b.display());
    let baseline = format!("{},{}", b.display(), b.display());

    let out = run(&["eval", "--runs", &runs, "--baseline-runs", &baseline]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    // mean of 73.47 and 70.83 with sample std; baseline has zero spread
    assert!(text.contains("runs: 72.15±1.86 (n=2)"), "{text}");
    assert!(text.contains("baseline: 70.83±0.00 (n=2)"), "{text}");
    assert!(
        text.contains("significance (permutation, unpaired): p ="),
        "{text}"
    );

    // Welch-t on zero-variance baselines falls back with a note.
    let out = run(&[
        "eval",
        "--runs",
        &baseline,
        "--baseline-runs",
        &baseline,
        "--method",
        "welch_t",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("note: zero variance"), "{text}");
    assert!(text.contains("(permutation"), "{text}");
}

#[test]
fn cost_report_matches_fixture() {
    let csv = fixture("power_samples.csv");
    let out = run(&[
        "cost-report",
        "--samples",
        csv.to_str().unwrap(),
        "--hours",
        "56",
        "--hardware",
        "1 GPU, 1 CPU",
        "--usd-per-hour",
        "3.07",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("HW\tHours\tCost\tPower\tCO2"), "{text}");
    assert!(text.contains("1 GPU, 1 CPU\t56\t172\t14.82\t14.14"), "{text}");
}

#[test]
fn co2_factor_one_reports_co2_equal_to_power() {
    let csv = fixture("power_samples.csv");
    let out = run(&[
        "cost-report",
        "--samples",
        csv.to_str().unwrap(),
        "--hours",
        "56",
        "--usd-per-hour",
        "3.07",
        "--co2-factor",
        "1.0",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("56\t172\t14.82\t14.82"), "{}", stdout(&out));
}

#[test]
fn cost_report_missing_csv_exits_two() {
    let out = run(&[
        "cost-report",
        "--samples",
        "/nonexistent/power.csv",
        "--hours",
        "1",
        "--usd-per-hour",
        "1.0",
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}
