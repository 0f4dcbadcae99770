use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn lmtk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmtk"))
        .args(args)
        .env_remove("LMTK_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = lmtk(args);
    assert!(
        out.status.success(),
        "lmtk {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TEXT: &str = "the cat sat on the mat. the dog sat on the log. \
the cat and the dog met on the mat by the log.";

fn small_corpus(dir: &TempDir) -> PathBuf {
    let docs: Vec<String> = (0..40).map(|i| format!("{TEXT} item {i}. naïve café")).collect();
    let p = dir.path().join("small.txt");
    fs::write(&p, docs.join("<eot>")).unwrap();
    p
}

fn train_small(dir: &TempDir, k: &str) -> PathBuf {
    let corpus = small_corpus(dir);
    let vocab = dir.path().join(format!("v{k}.json"));
    ok(&["train", "--corpus", s(&corpus), "--vocab-size", k, "--output", s(&vocab)]);
    vocab
}

fn sample() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample.txt")
}

#[test]
fn trains_thousand_tokens_on_sample() {
    let dir = TempDir::new().unwrap();
    let vocab = dir.path().join("v.json");
    ok(&["train", "--corpus", s(&sample()), "-k", "1000", "-o", s(&vocab)]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&vocab).unwrap()).unwrap();
    assert_eq!(v["tokens"].as_array().unwrap().len(), 1000);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("v.report.json")).unwrap()).unwrap();
    let aves: Vec<f64> = report["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["ave_length"].as_f64().unwrap())
        .collect();
    assert!(!aves.is_empty());
    assert!(aves.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn encode_decode_round_trip() {
    let dir = TempDir::new().unwrap();
    let vocab = train_small(&dir, "60");
    let input = dir.path().join("in.txt");
    fs::write(&input, "the cat met the dog. ünïcode ✓ and\ttabs\n").unwrap();
    for format in ["text", "binary"] {
        let ids = dir.path().join(format!("ids.{format}"));
        let back = dir.path().join(format!("back.{format}"));
        ok(&["encode", "--vocab", s(&vocab), "-i", s(&input), "-o", s(&ids), "--format", format]);
        ok(&["decode", "--vocab", s(&vocab), "-i", s(&ids), "-o", s(&back)]);
        assert_eq!(fs::read(&back).unwrap(), fs::read(&input).unwrap());
        if format == "binary" {
            assert_eq!(&fs::read(&ids).unwrap()[..4], b"LMTK");
        }
    }
}

#[test]
fn bpe_round_trip() {
    let dir = TempDir::new().unwrap();
    let corpus = small_corpus(&dir);
    let table = dir.path().join("bpe.json");
    ok(&["train-bpe", "--corpus", s(&corpus), "-k", "60", "-o", s(&table)]);
    let input = dir.path().join("in.txt");
    fs::write(&input, "the dog sat by the café").unwrap();
    let ids = dir.path().join("ids");
    let back = dir.path().join("back");
    ok(&["encode", "--vocab", s(&table), "-i", s(&input), "-o", s(&ids)]);
    ok(&["decode", "--vocab", s(&table), "-i", s(&ids), "-o", s(&back)]);
    assert_eq!(fs::read(&back).unwrap(), fs::read(&input).unwrap());
}

#[test]
fn missing_vocab_fails() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.txt");
    fs::write(&input, "x").unwrap();
    let out = lmtk(&["encode", "--vocab", s(&dir.path().join("absent.json")), "-i", s(&input)]);
    assert!(!out.status.success());
}

#[test]
fn invalid_k_names_the_flag() {
    let dir = TempDir::new().unwrap();
    let corpus = small_corpus(&dir);
    for k in ["5", "0"] {
        let out = lmtk(&["train", "--corpus", s(&corpus), "-k", k, "-o", s(&dir.path().join("v.json"))]);
        assert!(!out.status.success());
        assert!(String::from_utf8_lossy(&out.stderr).contains("--vocab-size"));
    }
    assert!(!dir.path().join("v.json").exists());
}

#[test]
fn word_separated_tokens_stay_inside_words() {
    let dir = TempDir::new().unwrap();
    let corpus = small_corpus(&dir);
    let vocab = dir.path().join("ws.json");
    ok(&["train", "--corpus", s(&corpus), "-k", "80", "--word-separated", "-o", s(&vocab)]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&vocab).unwrap()).unwrap();
    assert_eq!(v["word_separated"], true);
    for t in v["tokens"].as_array().unwrap() {
        let t = t.as_str().unwrap();
        let inner = t.strip_suffix('\u{2423}').unwrap_or(t);
        assert!(!inner.contains('\u{2423}'), "{t:?}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let corpus = small_corpus(&dir);
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("v.json");
    fs::write(
        &cfg,
        format!("# run\ncorpus = {}\nvocab_size = 55\noutput = {}\n", s(&corpus), s(&out)),
    )
    .unwrap();
    ok(&["train", "--config", s(&cfg)]);
    let n = |p: &Path| {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
        v["tokens"].as_array().unwrap().len()
    };
    assert_eq!(n(&out), 55);
    ok(&["train", "--config", s(&cfg), "--vocab-size", "50"]);
    assert_eq!(n(&out), 50);
}

#[test]
fn compare_grid_shape() {
    let dir = TempDir::new().unwrap();
    let a = train_small(&dir, "60");
    let b = train_small(&dir, "50");
    let mut corpora = Vec::new();
    for (i, t) in ["the cat sat", "the dog met the log", "on the mat by the log"].iter().enumerate() {
        let p = dir.path().join(format!("c{i}.txt"));
        fs::write(&p, t).unwrap();
        corpora.push(format!("c{i}={}", s(&p)));
    }
    let va = format!("a={}", s(&a));
    let vb = format!("b={}", s(&b));
    let mut args = vec!["compare", "--vocab", &va, "--vocab", &vb];
    for c in &corpora {
        args.extend(["--corpus", c.as_str()]);
    }
    let out = ok(&args);
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4, "{csv}");
    assert_eq!(lines[0].split(',').count(), 3);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 3));

    let out = ok(&["compare", "--vocab", &va, "--corpus", &corpora[0], "--reference"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("not reproducible"));
    assert!(text.contains("News,50000,1.029,1.229"));
}

#[test]
fn oracle_toy_instance() {
    let out = ok(&["oracle"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["brute_force"][1], 58);
    assert_eq!(v["greedy"][1], 58);
    assert_eq!(v["brute_force"][0], serde_json::json!([[0, 1, 2], [3, 4]]));
}

#[test]
fn noise_is_seeded() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.txt");
    fs::write(&input, TEXT).unwrap();
    let run = |rate: &str, seed: &str| {
        String::from_utf8(ok(&["noise", "-i", s(&input), "--rate", rate, "--seed", seed]).stdout).unwrap()
    };
    assert_eq!(run("0", "1"), TEXT);
    let noisy = run("0.3", "7");
    assert_eq!(noisy, run("0.3", "7"));
    assert_ne!(noisy, TEXT);
    assert_eq!(noisy.chars().count(), TEXT.chars().count());
    // Spaces are never substituted.
    let spaces = |t: &str| t.match_indices(' ').map(|(i, _)| i).collect::<Vec<_>>();
    assert_eq!(spaces(&noisy), spaces(TEXT));

    let vocab = train_small(&dir, "60");
    let out = ok(&["noise", "-i", s(&input), "--vocab", s(&vocab)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["runs"].as_array().unwrap().len(), 5);
}

#[test]
fn stats_and_zipf_report() {
    let dir = TempDir::new().unwrap();
    let vocab = train_small(&dir, "60");
    let corpus = small_corpus(&dir);
    let out = ok(&["stats", "--vocab", s(&vocab), "--corpus", s(&corpus), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let tpc = v["tpc"].as_f64().unwrap();
    assert!(tpc > 0.0 && tpc < 1.0);
    assert_eq!(v["oov_rate"], 0.0);
    let out = ok(&["zipf", "--vocab", s(&vocab), "--corpus", s(&corpus), "--format", "json"]);
    let z: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(z["r2"].as_f64().unwrap() >= 0.0);
}
