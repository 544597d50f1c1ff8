use super::*;
use crate::dom::parse_html;
use crate::encoder::UNK;
use crate::model::ModelConfig;

const NAMES: [&str; 6] = ["Tanaka", "Suzuki", "Sato", "Ito", "Kato", "Mori"];

/// Two-column table; value cells labeled by column.
fn table(i: usize, source: &str) -> LabeledTable {
    let mut html = String::from("<table><tr><th>Name</th><th>Age</th></tr>");
    for r in 0..2 {
        let name = NAMES[(i + r) % NAMES.len()];
        html.push_str(&format!("<tr><td>{name}</td><td>{}</td></tr>", 3 + i + r));
    }
    html.push_str("</table>");
    let mut tree = parse_html(&html).unwrap();
    for row in tree.root.children.iter_mut().skip(1) {
        row.children[0].gold_label = Some("Name".into());
        row.children[1].gold_label = Some("Age".into());
    }
    tree.fill_missing_labels(OTHER);
    LabeledTable {
        id: format!("t{i}"),
        source: source.into(),
        tree,
    }
}

fn small(epochs: usize) -> TrainConfig {
    let mut c = TrainConfig {
        model: ModelConfig {
            d_hidden: 8,
            d_classifier: 8,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    };
    c.model.encoder.d_word = 8;
    c.model.encoder.d_pos = 3;
    c.model.encoder.d_enc = 8;
    c.optim.epochs = epochs;
    c.optim.dropout_p = 0.1;
    c
}

#[test]
fn classes_follow_first_appearance() {
    assert_eq!(collect_classes(&[table(0, "a")]), vec!["Name", "Age", OTHER]);
}

#[test]
fn overfit_smoke_loss_decreases() {
    let out = train::<f64>(&[table(0, "a")], &small(10), &TrainOptions::default()).unwrap();
    assert_eq!(out.log.len(), 10);
    assert!(out.log[9].mean_loss < out.log[0].mean_loss, "{:?}", out.log);
}

#[test]
fn learning_rate_schedule_is_logged() {
    let mut cfg = small(4);
    cfg.optim.halve_every = 2;
    let out = train::<f64>(&[table(0, "a")], &cfg, &TrainOptions::default()).unwrap();
    let lrs: Vec<f64> = out.log.iter().map(|r| r.lr).collect();
    assert_eq!(lrs, vec![1e-2, 1e-2, 5e-3, 5e-3]);
}

#[test]
fn training_is_reproducible() {
    let tables: Vec<_> = (0..3).map(|i| table(i, "a")).collect();
    let mut cfg = small(3);
    cfg.optim.minibatch = 2;
    cfg.augment = true;
    let a = train::<f64>(&tables, &cfg, &TrainOptions::default()).unwrap();
    let b = train::<f64>(&tables, &cfg, &TrainOptions::default()).unwrap();
    for ((_, _, x), (_, _, y)) in a.model.params.iter().zip(b.model.params.iter()) {
        assert_eq!(x, y);
    }
}

#[test]
fn zero_probability_augmentation_is_a_no_op() {
    let tables: Vec<_> = (0..3).map(|i| table(i, "a")).collect();
    let off = small(3);
    let mut on = off.clone();
    on.augment = true;
    on.augment_p = 0.0;
    let a = train::<f64>(&tables, &off, &TrainOptions::default()).unwrap();
    let b = train::<f64>(&tables, &on, &TrainOptions::default()).unwrap();
    for ((_, _, x), (_, _, y)) in a.model.params.iter().zip(b.model.params.iter()) {
        assert_eq!(x, y);
    }
    assert_eq!(a.log.iter().map(|r| r.mean_loss).collect::<Vec<_>>(), b.log.iter().map(|r| r.mean_loss).collect::<Vec<_>>());
}

#[test]
fn overfits_five_tables() {
    let tables: Vec<_> = (0..5).map(|i| table(i, "a")).collect();
    let out = train::<f64>(&tables, &small(60), &TrainOptions::default()).unwrap();
    let ev = evaluate(&out.model, &tables).unwrap();
    assert!(ev.metrics.mean_f1 >= 0.99, "{:?}", ev.metrics);
}

#[test]
fn checkpoint_reload_evaluates_identically() {
    let tables: Vec<_> = (0..2).map(|i| table(i, "a")).collect();
    let out = train::<f64>(&tables, &small(2), &TrainOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("ck.json");
    Checkpoint::from_model(&out.model).save(&p).unwrap();
    let back: HtmlLstm<f64> = Checkpoint::load(&p).unwrap().into_model().unwrap();
    assert_eq!(evaluate(&out.model, &tables).unwrap(), evaluate(&back, &tables).unwrap());
}

#[test]
fn all_other_corpus_scores_one() {
    let tables = vec![table(0, "a")];
    let out = train::<f64>(&tables, &small(1), &TrainOptions::default()).unwrap();
    let mut model = out.model;
    let bias = model.handles().classifier.b_out;
    let other = model.class_index(OTHER).unwrap();
    for (i, v) in model.params.get_mut(bias).data_mut().iter_mut().enumerate() {
        *v = if i == other { 100.0 } else { -100.0 };
    }
    let mut t = table(0, "a");
    t.tree.root.visit_preorder_mut(&mut |n| n.gold_label = Some(OTHER.into()));
    assert_eq!(evaluate(&model, &[t]).unwrap().metrics.mean_f1, 1.0);
}

#[test]
fn unknown_corpus_class_is_a_mismatch() {
    let out = train::<f64>(&[table(0, "a")], &small(1), &TrainOptions::default()).unwrap();
    let mut t = table(1, "a");
    t.tree.root.gold_label = Some("Phone".into());
    assert!(matches!(evaluate(&out.model, &[t]), Err(Error::ClassMismatch(_))));
}

#[test]
fn vocabulary_comes_from_the_training_split_only() {
    let out = train::<f64>(&[table(0, "a")], &small(1), &TrainOptions::default()).unwrap();
    let v = &out.model.vocabs;
    assert!(v.tokens.get("Tanaka").is_some());
    // names only present in other tables are unknown to the model
    assert!(v.tokens.get("Mori").is_none());
    assert_eq!(v.tokens.lookup("Mori"), v.tokens.lookup(UNK));
}

#[test]
fn divergence_aborts_with_a_dump() {
    let tables: Vec<_> = (0..3).map(|i| table(i, "a")).collect();
    let mut cfg = small(3);
    cfg.optim.alpha = 1e300;
    cfg.optim.minibatch = 1;
    let dir = tempfile::tempdir().unwrap();
    let opts = TrainOptions {
        dump_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    match train::<f64>(&tables, &cfg, &opts) {
        Err(Error::DivergedLoss { dump: Some(p), .. }) => assert!(p.exists()),
        other => panic!("expected divergence, got {:?}", other.map(|o| o.log)),
    }
}

#[test]
fn epoch_log_is_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("log.jsonl");
    let opts = TrainOptions {
        log_path: Some(p.clone()),
        ..Default::default()
    };
    let out = train::<f64>(&[table(0, "a")], &small(3), &opts).unwrap();
    let lines: Vec<EpochRecord> = std::fs::read_to_string(&p)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines, out.log);
}

#[test]
fn ablation_reports_three_rows_in_order() {
    let tables: Vec<_> = (0..4).map(|i| table(i, ["a", "b"][i % 2])).collect();
    let report = run_ablation(&tables, &small(1), &[1], Protocol::Holdout).unwrap();
    let names: Vec<&str> = report.rows.iter().map(|r| r.variant.as_str()).collect();
    assert_eq!(names, ABLATION_VARIANTS);
    assert_eq!(report.ordering().len(), 3);
    assert_eq!(report.to_csv().lines().count(), 4);
}

#[test]
fn model_gradients_match_finite_differences() {
    let check = check_model_gradients(7, 5, 12).unwrap();
    assert_eq!(check.groups.len(), 5);
    for (name, e) in &check.groups {
        assert!(*e < GRADCHECK_TOLERANCE, "{name}: {e}");
    }
    assert!(check.passed());
}

#[test]
fn augmentation_adds_copies_beside_the_originals() {
    let tables: Vec<_> = (0..3).map(|i| table(i, "a")).collect();
    let off = small(2);
    let mut on = off.clone();
    on.augment = true;
    on.augment_p = 1.0;
    let a = train::<f64>(&tables, &off, &TrainOptions::default()).unwrap();
    let b = train::<f64>(&tables, &on, &TrainOptions::default()).unwrap();
    assert_ne!(a.log[0].mean_loss, b.log[0].mean_loss);
}
