use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
lambda = 100.0
train_stride = 8

[window]
context_len = 24
suspect_len = 4

[encoder]
hidden_channels = 3
num_blocks = 2
kernel_size = 2
embedding_dim = 3

[train]
epochs = 2
batch_size = 16
learning_rate = 0.01
max_pairs_per_epoch = 48
"#;

fn tfad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfad")).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field<'a>(summary: &'a str, key: &str) -> &'a str {
    summary
        .lines()
        .last()
        .unwrap()
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {summary}"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic data plus the tiny config in a fresh directory.
fn setup(dir: &Path) {
    fs::write(dir.join("tiny.toml"), TINY).unwrap();
    let data = dir.join("data");
    let out = ok(&tfad(&[
        "synth", "--out-dir", s(&data), "--n-series", "4", "--len", "300", "--seed", "3",
    ]));
    assert!(out.starts_with("tfad synth status=ok"));
    assert_eq!(field(&out, "train"), "1");
    assert_eq!(field(&out, "test"), "2");
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let again = dir.path().join("again");
    ok(&tfad(&["synth", "--out-dir", s(&again), "--n-series", "4", "--len", "300", "--seed", "3"]));
    for f in ["train.ndjson", "val.ndjson", "test.ndjson", "injections.json"] {
        assert_eq!(fs::read(dir.path().join("data").join(f)).unwrap(), fs::read(again.join(f)).unwrap());
    }
}

#[test]
fn train_detect_eval_round() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    let cfg = d.join("tiny.toml");
    let ck = d.join("model.json");
    let out = ok(&tfad(&[
        "train",
        "--config", s(&cfg),
        "--train", s(&d.join("data/train.ndjson")),
        "--val", s(&d.join("data/val.ndjson")),
        "--checkpoint", s(&ck),
        "--seed", "5",
    ]));
    assert_eq!(field(&out, "epochs"), "2");
    let trace = fs::read_to_string(d.join("model.json.loss.csv")).unwrap();
    assert_eq!(trace.lines().count(), 3);

    let detect = |dir: &str| {
        ok(&tfad(&[
            "detect",
            "--config", s(&cfg),
            "--checkpoint", s(&ck),
            "--input", s(&d.join("data/test.ndjson")),
            "--out-dir", s(&d.join(dir)),
            "--seed", "5",
        ]))
    };
    detect("a");
    detect("b");
    let mut names: Vec<_> = fs::read_dir(d.join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4);
    for n in &names {
        assert_eq!(fs::read(d.join("a").join(n)).unwrap(), fs::read(d.join("b").join(n)).unwrap());
    }
    let scores = fs::read_to_string(d.join("a/series-002.scores.csv")).unwrap();
    assert!(scores.starts_with("start,score\n"));
    assert_eq!(scores.lines().count(), 1 + 300 - 28 + 1);
    let labels = d.join("a/series-002.labels.csv");
    assert!(fs::read_to_string(&labels).unwrap().starts_with("timestamp,label\n"));

    let report = d.join("report.jsonl");
    let out = ok(&tfad(&[
        "eval", "--pred", s(&labels), "--truth", s(&labels), "--out", s(&report), "--threshold", "0.5",
    ]));
    assert_eq!(field(&out, "f1"), "1");
    let record = fs::read_to_string(&report).unwrap();
    for key in ["\"precision\"", "\"recall\"", "\"f1\":1.0", "\"threshold\":0.5", "\"tp\"", "\"fp\"", "\"fn\""] {
        assert!(record.contains(key), "{record}");
    }
}

#[test]
fn ablation_toggles_train() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    let time_only = d.join("time.toml");
    fs::write(&time_only, format!("{TINY}\n[branches]\nfreq_trend = false\nfreq_residual = false\n")).unwrap();
    let mut counts = Vec::new();
    for (cfg, ck) in [(time_only, "time.json"), (d.join("tiny.toml"), "full.json")] {
        let out = ok(&tfad(&[
            "train", "--config", s(&cfg), "--train", s(&d.join("data/train.ndjson")), "--checkpoint", s(&d.join(ck)),
        ]));
        counts.push(field(&out, "params").parse::<usize>().unwrap());
        assert!(tfad::nn::Checkpoint::load(&d.join(ck)).is_ok());
    }
    assert!(counts[0] < counts[1]);
}

#[test]
fn augment_writes_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    let out = d.join("aug.ndjson");
    let summary = ok(&tfad(&[
        "augment", "--config", s(&d.join("tiny.toml")), "--input", s(&d.join("data/train.ndjson")), "--out", s(&out),
    ]));
    let original: usize = field(&summary, "original").parse().unwrap();
    let total: usize = field(&summary, "augmented").parse().unwrap();
    assert_eq!(total, original + original.div_ceil(2) + (original * 2).div_ceil(5));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), total);
}

#[test]
fn errors_are_categorized() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = tfad(&["augment", "--input", s(&d.join("missing.csv")), "--out", s(&d.join("x.ndjson"))]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("category=io"));

    let bad = d.join("bad.toml");
    fs::write(&bad, "[window]\nstride = 0\n").unwrap();
    let out = tfad(&["synth", "--config", s(&bad), "--out-dir", s(d)]);
    assert_eq!(out.status.code(), Some(8));
    assert!(String::from_utf8_lossy(&out.stderr).contains("category=config"));

    let desc = d.join("desc.csv");
    fs::write(&desc, "timestamp,value\n2,1.0\n1,2.0\n").unwrap();
    let out = tfad(&["augment", "--input", s(&desc), "--out", s(&d.join("x.ndjson"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("category=input"));
}
