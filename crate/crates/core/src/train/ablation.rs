use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{collect_classes, evaluate, fold_split, holdout_split, split_folds, train, TrainConfig, TrainOptions};
use crate::dom::LabeledTable;
use crate::error::Result;
use crate::model::Variant;

/// Row names, in report order.
pub const ABLATION_VARIANTS: [&str; 3] = ["upward-only", "full", "full+aug"];

/// How held-out scores are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// One source-grouped split using `test_fraction`.
    Holdout,
    /// `folds`-fold source-grouped cross-validation; the score is the mean
    /// over folds.
    CrossValidation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    /// Held-out macro F1 per seed.
    pub per_seed: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seeds: Vec<u64>,
    pub protocol: Protocol,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, variant: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    /// Variant names sorted by descending mean.
    pub fn ordering(&self) -> Vec<&str> {
        let mut v: Vec<&AblationRow> = self.rows.iter().collect();
        v.sort_by(|a, b| b.mean.total_cmp(&a.mean));
        v.into_iter().map(|r| r.variant.as_str()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant");
        for s in &self.seeds {
            let _ = write!(out, ",seed_{s}");
        }
        out.push_str(",mean\n");
        for r in &self.rows {
            out.push_str(&r.variant);
            for v in &r.per_seed {
                let _ = write!(out, ",{v:.4}");
            }
            let _ = writeln!(out, ",{:.4}", r.mean);
        }
        out
    }
}

fn variant_config(base: &TrainConfig, name: &str, seed: u64) -> TrainConfig {
    let mut c = base.clone();
    c.seed = seed;
    let (variant, augment) = match name {
        "upward-only" => (Variant::UpwardOnly, false),
        "full" => (Variant::Full, false),
        _ => (Variant::Full, true),
    };
    c.model.variant = variant;
    c.augment = augment;
    c
}

/// Trains the upward-only, full and full+augmentation variants for every
/// seed on the same splits (drawn with `cfg.seed`) and reports held-out
/// macro F1.
pub fn run_ablation(tables: &[LabeledTable], cfg: &TrainConfig, seeds: &[u64], protocol: Protocol) -> Result<AblationReport> {
    cfg.validate()?;
    let classes = collect_classes(tables);
    let splits: Vec<(Vec<usize>, Vec<usize>)> = match protocol {
        Protocol::Holdout => vec![holdout_split(tables, cfg.test_fraction, cfg.seed)?],
        Protocol::CrossValidation => {
            let folds = split_folds(tables, cfg.folds, true, cfg.seed)?;
            (0..folds.len()).map(|i| fold_split(&folds, i)).collect()
        }
    };
    let pick = |ix: &[usize]| -> Vec<LabeledTable> { ix.iter().map(|&i| tables[i].clone()).collect() };
    let opts = TrainOptions {
        classes: Some(classes),
        ..Default::default()
    };
    let mut rows = Vec::new();
    for name in ABLATION_VARIANTS {
        let mut per_seed = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let vc = variant_config(cfg, name, seed);
            let mut total = 0.0;
            for (train_ix, test_ix) in &splits {
                let outcome = train::<f64>(&pick(train_ix), &vc, &opts)?;
                let f1 = evaluate(&outcome.model, &pick(test_ix))?.metrics.mean_f1;
                log::info!("ablation {name} seed {seed}: held-out macro F1 {f1:.4}");
                total += f1;
            }
            per_seed.push(total / splits.len() as f64);
        }
        let mean = per_seed.iter().sum::<f64>() / per_seed.len().max(1) as f64;
        rows.push(AblationRow {
            variant: name.to_string(),
            per_seed,
            mean,
        });
    }
    Ok(AblationReport {
        seeds: seeds.to_vec(),
        protocol,
        rows,
    })
}
