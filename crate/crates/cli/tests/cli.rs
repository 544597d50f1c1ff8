use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_html-lstm"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        o.status,
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn synth_then_parse_dumps_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_dir = dir.path().join("corpus");
    ok(&run(&["synth", "--n", "10", "--seed", "3"], &corpus_dir));
    let corpus = corpus_dir.join("corpus.jsonl");
    let before = std::fs::read(&corpus).unwrap();
    let parsed = dir.path().join("parsed");
    ok(&run(&["parse", corpus.to_str().unwrap()], &parsed));
    assert_eq!(std::fs::read_dir(parsed.join("trees")).unwrap().count(), 10);
    assert!(parsed.join("config.txt").exists());
    // inputs are left untouched
    assert_eq!(std::fs::read(&corpus).unwrap(), before);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["synth", "--bogus"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_config_key_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["synth", "--n", "2", "--set", "optim.nope=1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("optim.nope"));
}

#[test]
fn gradcheck_passes_at_seed_seven() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["gradcheck", "--seed", "7"], dir.path());
    ok(&o);
    let text = String::from_utf8_lossy(&o.stdout);
    let line = text.lines().find(|l| l.starts_with("max relative error")).unwrap();
    let e: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(e < 1e-4, "{text}");
}

#[test]
fn pipeline_train_extract_integrate() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s);
    ok(&run(&["synth", "--n", "8", "--seed", "1"], &p("corpus")));
    let corpus = p("corpus/corpus.jsonl");
    let synonyms = p("corpus/synonyms.tsv");
    let small = [
        "--set", "optim.epochs=2",
        "--set", "model.d_word=8",
        "--set", "model.d_enc=8",
        "--set", "model.d_hidden=8",
        "--set", "model.d_classifier=8",
    ];
    let syn = format!("synonyms={}", synonyms.display());
    let mut args = vec!["train", "--corpus", corpus.to_str().unwrap(), "--set", syn.as_str()];
    args.extend(small);
    ok(&run(&args, &p("train")));
    for f in ["model.json", "train_log.jsonl", "config.txt", "train_metrics.csv"] {
        assert!(p("train").join(f).exists(), "{f}");
    }
    assert_eq!(std::fs::read_to_string(p("train/train_log.jsonl")).unwrap().lines().count(), 2);

    let model = p("train/model.json");
    ok(&run(&["evaluate", "--model", model.to_str().unwrap(), "--corpus", corpus.to_str().unwrap()], &p("eval")));
    let metrics = std::fs::read_to_string(p("eval/metrics.csv")).unwrap();
    assert!(metrics.starts_with("class,precision,recall,f1"));

    ok(&run(&["extract", "--model", model.to_str().unwrap(), corpus.to_str().unwrap()], &p("extract")));
    let preds = p("extract/predictions.jsonl");
    assert_eq!(std::fs::read_to_string(&preds).unwrap().lines().count(), 8);

    ok(&run(
        &[
            "integrate", "--predictions", preds.to_str().unwrap(),
            "--model", model.to_str().unwrap(), "--format", "jsonl", "--mode", "multi",
        ],
        &p("integrate"),
    ));
    let table = std::fs::read_to_string(p("integrate/unified.jsonl")).unwrap();
    assert_eq!(table.lines().count(), 8);

    // the snapshot alone reproduces the training run
    ok(&run(
        &["train", "--corpus", corpus.to_str().unwrap(), "--config", p("train/config.txt").to_str().unwrap()],
        &p("again"),
    ));
    assert_eq!(
        std::fs::read(p("train/model.json")).unwrap(),
        std::fs::read(p("again/model.json")).unwrap()
    );
}
