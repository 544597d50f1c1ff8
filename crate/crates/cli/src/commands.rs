use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use html_lstm::dom::{dump_tree, extract_table_subtrees, parse_html_with, read_corpus, DomTree, TaggerRegistry, OTHER};
use html_lstm::extract::{integrate, write_table, Mode, TableFormat};
use html_lstm::model::Checkpoint;
use html_lstm::synth::{generate_corpus, write_corpus_dir, LayoutFamily, Manifest, Schema};
use html_lstm::train::{
    check_model_gradients, evaluate, holdout_split, load_corpus, run_ablation, train, Protocol, TablePredictions,
    TrainOptions,
};
use html_lstm::HtmlLstm64;
use serde::Serialize;

use crate::run::{RunConfig, RunDir};
use crate::{Command, DownwardCellArg, FormatArg, GlobalArgs, ModeArg, ProtocolArg, SeedModeArg, VariantArg};

/// Defaults, then the config file, then dedicated flags, then `--set`.
pub fn resolve(g: &GlobalArgs) -> Result<RunConfig> {
    let mut c = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        c.train.seed = s;
    }
    if let Some(t) = g.threshold {
        c.integrate.threshold = t;
    }
    if let Some(m) = g.mode {
        c.integrate.mode = match m {
            ModeArg::Single => Mode::Single,
            ModeArg::Multi => Mode::Multi,
        };
    }
    if let Some(v) = g.variant {
        let (variant, augment) = match v {
            VariantArg::Upward => ("upward-only", false),
            VariantArg::Full => ("full", false),
            VariantArg::FullAug => ("full", true),
        };
        c.set("model.variant", variant)?;
        c.train.augment = augment;
    }
    if let Some(d) = g.downward_cell {
        c.set(
            "model.downward_cell",
            match d {
                DownwardCellArg::Perchild => "perchild",
                DownwardCellArg::Summed => "summed",
            },
        )?;
    }
    if let Some(s) = g.seed_mode {
        c.set(
            "model.seed_mode",
            match s {
                SeedModeArg::UpwardRoot => "upward-root",
                SeedModeArg::Zero => "zero",
            },
        )?;
    }
    for kv in &g.set {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("--set expects KEY=VALUE, got `{kv}`");
        };
        c.set(k, v)?;
    }
    c.validate()?;
    Ok(c)
}

pub fn dispatch(cmd: Command, g: &GlobalArgs) -> Result<ExitCode> {
    let cfg = resolve(g)?;
    let name = match &cmd {
        Command::Synth { .. } => "synth",
        Command::Parse { .. } => "parse",
        Command::Train { .. } => "train",
        Command::Evaluate { .. } => "evaluate",
        Command::Ablate { .. } => "ablate",
        Command::Extract { .. } => "extract",
        Command::Integrate { .. } => "integrate",
        Command::Gradcheck { .. } => "gradcheck",
    };
    let dir = RunDir::create(&g.out, &cfg, name)?;
    match cmd {
        Command::Synth { n, structure_only } => synth(&cfg, &dir, n, structure_only),
        Command::Parse { input } => parse(&cfg, &dir, &input),
        Command::Train { corpus, holdout } => train_cmd(&cfg, &dir, &corpus, holdout),
        Command::Evaluate { model, corpus } => evaluate_cmd(&cfg, &dir, &model, &corpus),
        Command::Ablate {
            corpus,
            seeds,
            protocol,
        } => ablate(&cfg, &dir, &corpus, &seeds, protocol),
        Command::Extract { model, input } => extract(&cfg, &dir, &model, &input),
        Command::Integrate {
            predictions,
            model,
            schema,
            format,
        } => integrate_cmd(&cfg, &dir, &predictions, &model, schema, format),
        Command::Gradcheck { trees, max_nodes } => gradcheck(&cfg, &dir, trees, max_nodes),
    }
}

fn is_corpus(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "page".into())
}

/// Tables of an input file with their ids: every record of a corpus, or
/// every outermost table of an HTML page.
fn read_tables(cfg: &RunConfig, input: &Path) -> Result<Vec<(String, DomTree)>> {
    let registry = TaggerRegistry::default();
    let tagger = registry.get(&cfg.train.tagger)?;
    if is_corpus(input) {
        read_corpus(input)?
            .iter()
            .map(|r| Ok((r.id.clone(), r.to_table(tagger.as_ref())?.tree)))
            .collect()
    } else {
        let html = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
        let page = parse_html_with(&html, tagger.as_ref())?;
        let stem = file_stem(input);
        Ok(extract_table_subtrees(&page)
            .into_iter()
            .enumerate()
            .map(|(k, t)| (format!("{stem}-{k}"), t))
            .collect())
    }
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    for it in items {
        serde_json::to_writer(&mut f, it)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

fn load_model(path: &Path) -> Result<HtmlLstm64> {
    let ck = Checkpoint::load(path).with_context(|| format!("loading model {}", path.display()))?;
    Ok(ck.into_model()?)
}

fn synth(cfg: &RunConfig, dir: &RunDir, n: usize, structure_only: bool) -> Result<ExitCode> {
    let schema = Schema::default();
    let families = LayoutFamily::defaults();
    let records = generate_corpus(n, &schema, &families, cfg.train.seed, structure_only)?;
    let manifest = Manifest {
        n,
        seed: cfg.train.seed,
        structure_only,
        schema,
        families,
    };
    write_corpus_dir(&dir.path, &records, &manifest)?;
    println!("wrote {} tables to {}", records.len(), dir.file("corpus.jsonl").display());
    Ok(ExitCode::SUCCESS)
}

fn parse(cfg: &RunConfig, dir: &RunDir, input: &Path) -> Result<ExitCode> {
    let tables = read_tables(cfg, input)?;
    let trees = dir.file("trees");
    std::fs::create_dir_all(&trees)?;
    for (id, t) in &tables {
        std::fs::write(trees.join(format!("{id}.txt")), dump_tree(t))?;
    }
    println!("wrote {} tree dumps to {}", tables.len(), trees.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct Split<'a> {
    train: Vec<&'a str>,
    test: Vec<&'a str>,
}

fn train_cmd(cfg: &RunConfig, dir: &RunDir, corpus: &Path, holdout: bool) -> Result<ExitCode> {
    let tables = load_corpus(corpus, &cfg.train)?;
    let (train_ix, test_ix) = if holdout {
        holdout_split(&tables, cfg.train.test_fraction, cfg.train.seed)?
    } else {
        ((0..tables.len()).collect(), Vec::new())
    };
    let pick = |ix: &[usize]| ix.iter().map(|&i| tables[i].clone()).collect::<Vec<_>>();
    let (train_set, test_set) = (pick(&train_ix), pick(&test_ix));
    let opts = TrainOptions {
        classes: Some(html_lstm::train::collect_classes(&tables)),
        log_path: Some(dir.file("train_log.jsonl")),
        dump_dir: Some(dir.path.clone()),
    };
    let outcome = train::<f64>(&train_set, &cfg.train, &opts)?;
    Checkpoint::from_model(&outcome.model).save(&dir.file("model.json"))?;
    if let Some(last) = outcome.log.last() {
        println!("trained {} epochs, final loss {:.5}", outcome.log.len(), last.mean_loss);
    }
    let fit = evaluate(&outcome.model, &train_set)?;
    fit.metrics.save_csv(&dir.file("train_metrics.csv"))?;
    println!("train macro F1 {:.4}", fit.metrics.mean_f1);
    if holdout {
        let split = Split {
            train: train_set.iter().map(|t| t.id.as_str()).collect(),
            test: test_set.iter().map(|t| t.id.as_str()).collect(),
        };
        std::fs::write(dir.file("split.json"), serde_json::to_string_pretty(&split)?)?;
        let ev = evaluate(&outcome.model, &test_set)?;
        ev.metrics.save_csv(&dir.file("metrics.csv"))?;
        println!("held-out macro F1 {:.4}", ev.metrics.mean_f1);
    }
    Ok(ExitCode::SUCCESS)
}

fn evaluate_cmd(cfg: &RunConfig, dir: &RunDir, model: &Path, corpus: &Path) -> Result<ExitCode> {
    let model = load_model(model)?;
    let tables = load_corpus(corpus, &cfg.train)?;
    let ev = evaluate(&model, &tables)?;
    ev.metrics.save_csv(&dir.file("metrics.csv"))?;
    write_jsonl(&dir.file("predictions.jsonl"), &ev.tables)?;
    let mut out = std::io::stdout().lock();
    ev.metrics.write_csv(&mut out)?;
    Ok(ExitCode::SUCCESS)
}

fn ablate(cfg: &RunConfig, dir: &RunDir, corpus: &Path, seeds: &[u64], protocol: ProtocolArg) -> Result<ExitCode> {
    let tables = load_corpus(corpus, &cfg.train)?;
    let protocol = match protocol {
        ProtocolArg::Holdout => Protocol::Holdout,
        ProtocolArg::Cv => Protocol::CrossValidation,
    };
    let report = run_ablation(&tables, &cfg.train, seeds, protocol)?;
    let csv = report.to_csv();
    std::fs::write(dir.file("ablation.csv"), &csv)?;
    std::fs::write(dir.file("ablation.json"), serde_json::to_string_pretty(&report)?)?;
    print!("{csv}");
    println!("ordering: {}", report.ordering().join(" > "));
    Ok(ExitCode::SUCCESS)
}

fn extract(cfg: &RunConfig, dir: &RunDir, model: &Path, input: &Path) -> Result<ExitCode> {
    let model = load_model(model)?;
    let mut out = Vec::new();
    for (id, tree) in read_tables(cfg, input)? {
        out.push(TablePredictions {
            table_id: id,
            predictions: model.forward(&tree)?,
        });
    }
    write_jsonl(&dir.file("predictions.jsonl"), &out)?;
    println!("classified {} tables", out.len());
    Ok(ExitCode::SUCCESS)
}

fn read_predictions(path: &Path) -> Result<Vec<TablePredictions>> {
    let reader = BufReader::new(File::open(path).with_context(|| format!("reading {}", path.display()))?);
    let mut out = Vec::new();
    for (no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), no + 1))?);
    }
    Ok(out)
}

fn integrate_cmd(
    cfg: &RunConfig,
    dir: &RunDir,
    predictions: &Path,
    model: &Path,
    schema: Option<Vec<String>>,
    format: FormatArg,
) -> Result<ExitCode> {
    let classes = Checkpoint::load(model)?.classes;
    let schema = schema.unwrap_or_else(|| classes.iter().filter(|c| *c != OTHER).cloned().collect());
    let tables = read_predictions(predictions)?;
    let unified = integrate(&tables, &schema, &classes, &cfg.integrate)?;
    let (format, ext) = match format {
        FormatArg::Csv => (TableFormat::Csv, "csv"),
        FormatArg::Jsonl => (TableFormat::Jsonl, "jsonl"),
        FormatArg::Html => (TableFormat::Html, "html"),
    };
    let path = dir.file(&format!("unified.{ext}"));
    write_table(&unified, format, &path)?;
    println!("wrote {} rows to {}", unified.rows.len(), path.display());
    Ok(ExitCode::SUCCESS)
}

fn gradcheck(cfg: &RunConfig, dir: &RunDir, trees: usize, max_nodes: usize) -> Result<ExitCode> {
    if trees == 0 || max_nodes == 0 {
        bail!("--trees and --max-nodes must be positive");
    }
    let check = check_model_gradients(cfg.train.seed, trees, max_nodes)?;
    let mut text = String::new();
    for (group, e) in &check.groups {
        text.push_str(&format!("{group}: {e:.3e}\n"));
    }
    text.push_str(&format!("max relative error: {:.3e}\n", check.max_rel_error));
    std::fs::write(dir.file("gradcheck.txt"), &text)?;
    print!("{text}");
    if check.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("gradient check failed");
        Ok(ExitCode::from(3))
    }
}
