//! Corpus handling, source-grouped splits, the minibatch training loop,
//! evaluation and the three-variant ablation.

mod ablation;
mod config;
mod folds;
mod gradcheck;

pub use ablation::{run_ablation, AblationReport, AblationRow, Protocol, ABLATION_VARIANTS};
pub use config::{parse_downward_cell, parse_seed_mode, parse_variant, TrainConfig, CONFIG_KEYS};
pub use folds::{fold_split, holdout_split, split_folds, Fold};
pub use gradcheck::{check_model_gradients, ModelGradCheck, GRADCHECK_TOLERANCE, PARAMETER_GROUPS};

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dom::{
    augment_tree, normalize_attribute_names, read_corpus, LabeledTable, SynonymDictionary, TaggerRegistry, OTHER,
};
use crate::encoder::Vocabularies;
use crate::error::{Error, Result};
use crate::loss::{batch_loss, compute_alpha, BatchLoss, LossConfig};
use crate::metrics::{evaluate_metrics, MetricsTable};
use crate::model::{Checkpoint, HtmlLstm, NodePrediction, PreparedTree};
use crate::scalar::Scalar;
use crate::seed::derive_seed;
use crate::tensor::{Adam, ParamGrads, ParamStore, Tape};

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_AUGMENT: u64 = 3;
const STREAM_DROPOUT: u64 = 4;

/// Reads a corpus file, parses every record with the configured tagger and
/// applies the synonym dictionary when one is configured.
pub fn load_corpus(path: &Path, cfg: &TrainConfig) -> Result<Vec<LabeledTable>> {
    let registry = TaggerRegistry::default();
    let tagger = registry.get(&cfg.tagger)?;
    let dict = match &cfg.synonyms {
        Some(p) => Some(SynonymDictionary::load(p)?),
        None => None,
    };
    let mut out = Vec::new();
    for rec in read_corpus(path)? {
        let mut t = rec.to_table(tagger.as_ref())?;
        if let Some(d) = &dict {
            t.tree = normalize_attribute_names(&t.tree, d, tagger.as_ref());
        }
        out.push(t);
    }
    if out.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(out)
}

/// Target classes in order of first appearance, followed by Other.
pub fn collect_classes<'a>(tables: impl IntoIterator<Item = &'a LabeledTable>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for t in tables {
        for n in t.tree.preorder() {
            if let Some(l) = &n.gold_label {
                if l != OTHER && !out.contains(l) {
                    out.push(l.clone());
                }
            }
        }
    }
    out.push(OTHER.to_string());
    out
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Zero-based epoch.
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Fixed class list; by default derived from the training tables.
    pub classes: Option<Vec<String>>,
    /// JSON-Lines epoch log.
    pub log_path: Option<PathBuf>,
    /// Where a checkpoint is dumped when the loss diverges.
    pub dump_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: HtmlLstm<T>,
    pub log: Vec<EpochRecord>,
    /// Class weights actually used by the focal term.
    pub alpha: Vec<f64>,
}

fn gold_targets(tree: &PreparedTree, other: Option<usize>) -> Result<Vec<usize>> {
    tree.gold
        .iter()
        .map(|g| g.or(other).ok_or_else(|| Error::ClassMismatch("unlabeled node".into())))
        .collect()
}

/// Training objective of one minibatch and its parameter gradient.
#[derive(Debug, Clone)]
pub struct BatchObjective<T> {
    pub loss: BatchLoss<T>,
    pub grads: ParamGrads<T>,
}

/// Mean focal loss over every node of `trees` plus one soft-F1 term over the
/// same nodes, differentiated with respect to `params` (which must share the
/// model's layout). `dropout(pos)` gives the dropout setting of the tree at
/// position `pos` of the batch.
pub fn batch_objective<T: Scalar>(
    model: &HtmlLstm<T>,
    params: &ParamStore<T>,
    trees: &[&PreparedTree],
    loss_cfg: &LossConfig,
    dropout: impl Fn(usize) -> Option<(f64, u64)>,
) -> Result<BatchObjective<T>> {
    let other = model.class_index(OTHER);
    let mut tapes = Vec::with_capacity(trees.len());
    for (pos, tree) in trees.iter().enumerate() {
        let mut tape = Tape::new(params);
        let out = model.forward_tape(&mut tape, tree, dropout(pos))?;
        tapes.push((tape, out));
    }
    let mut targets = Vec::new();
    let mut probs: Vec<&[T]> = Vec::new();
    for ((tape, out), tree) in tapes.iter().zip(trees) {
        targets.extend(gold_targets(tree, other)?);
        probs.extend(out.probs.iter().map(|&p| tape.value(p)));
    }
    let loss = batch_loss(&probs, &targets, other, loss_cfg)?;
    let mut grads = params.zero_grads();
    let mut offset = 0;
    for (tape, out) in &tapes {
        let seeds: Vec<_> = out
            .probs
            .iter()
            .zip(&loss.grads[offset..offset + out.probs.len()])
            .map(|(&v, g)| (v, g.clone()))
            .collect();
        offset += out.probs.len();
        tape.backward_into(&seeds, &mut grads)?;
    }
    Ok(BatchObjective { loss, grads })
}

/// Trains a fresh model on `tables`.
pub fn train<T: Scalar>(tables: &[LabeledTable], cfg: &TrainConfig, opts: &TrainOptions) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if tables.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let classes = opts.classes.clone().unwrap_or_else(|| collect_classes(tables));
    let vocabs = Vocabularies::build(tables.iter().map(|t| &t.tree), cfg.min_count)?;
    let mut model = HtmlLstm::<T>::new(cfg.model.clone(), vocabs, classes, derive_seed(cfg.seed, &[STREAM_INIT]))?;
    let other = model.class_index(OTHER);

    let base: Vec<PreparedTree> = tables.iter().map(|t| model.prepare(&t.tree)).collect::<Result<_>>()?;
    let alpha = match &cfg.loss.alpha {
        Some(a) if a.len() == model.classes.len() => a.clone(),
        Some(a) => {
            return Err(Error::Config(format!(
                "loss.alpha has {} entries for {} classes",
                a.len(),
                model.classes.len()
            )))
        }
        None => {
            let mut counts = vec![0usize; model.classes.len()];
            for t in &base {
                for g in gold_targets(t, other)? {
                    counts[g] += 1;
                }
            }
            compute_alpha(&counts)?
        }
    };
    let loss_cfg = LossConfig {
        alpha: Some(alpha.clone()),
        ..cfg.loss.clone()
    };

    let mut log_file = match &opts.log_path {
        Some(p) => Some(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => None,
    };
    let mut adam = Adam::new(cfg.optim.clone(), &model.params);
    let mut log = Vec::with_capacity(cfg.optim.epochs);
    for epoch in 0..cfg.optim.epochs {
        let start = Instant::now();
        let augmented;
        let trees: &[PreparedTree] = if cfg.augment {
            let mut v = base.clone();
            for (i, t) in tables.iter().enumerate() {
                for copy in 0..cfg.augment_copies {
                    let seed = derive_seed(cfg.seed, &[STREAM_AUGMENT, epoch as u64, i as u64, copy as u64]);
                    let aug = augment_tree(&t.tree, seed, cfg.augment_p);
                    // a copy equal to its source adds nothing new
                    if aug != t.tree {
                        v.push(model.prepare(&aug)?);
                    }
                }
            }
            augmented = v;
            &augmented
        } else {
            &base
        };
        let mut order: Vec<usize> = (0..trees.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
            cfg.seed,
            &[STREAM_SHUFFLE, epoch as u64],
        )));

        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(cfg.optim.minibatch).enumerate() {
            let batch: Vec<&PreparedTree> = chunk.iter().map(|&ti| &trees[ti]).collect();
            let dropout = |pos: usize| {
                let seed = derive_seed(cfg.seed, &[STREAM_DROPOUT, epoch as u64, b as u64, pos as u64]);
                Some((cfg.optim.dropout_p, seed))
            };
            let obj = batch_objective(&model, &model.params, &batch, &loss_cfg, dropout)?;
            let bl = obj.loss;
            if !bl.loss.is_finite() || !obj.grads.all_finite() {
                let dump = match &opts.dump_dir {
                    Some(d) => {
                        let p = d.join(format!("diverged-e{epoch}-b{b}.json"));
                        Checkpoint::from_model(&model).save(&p)?;
                        Some(p)
                    }
                    None => None,
                };
                log::error!("non-finite loss at epoch {epoch}, batch {b}");
                return Err(Error::DivergedLoss { epoch, batch: b, dump });
            }
            let grads = obj.grads;
            adam.step(&mut model.params, &grads, epoch)?;
            loss_sum += bl.loss;
            batches += 1;
        }
        let rec = EpochRecord {
            epoch,
            lr: cfg.optim.learning_rate(epoch),
            mean_loss: loss_sum / batches.max(1) as f64,
            wall_ms: start.elapsed().as_millis() as u64,
        };
        log::info!("epoch {} lr {:.3e} loss {:.5} ({} ms)", rec.epoch, rec.lr, rec.mean_loss, rec.wall_ms);
        if let Some(f) = log_file.as_mut() {
            serde_json::to_writer(&mut *f, &rec)?;
            f.write_all(b"\n")?;
        }
        log.push(rec);
    }
    if let Some(mut f) = log_file {
        f.flush()?;
    }
    Ok(TrainOutcome { model, log, alpha })
}

/// Predictions of one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TablePredictions {
    pub table_id: String,
    pub predictions: Vec<NodePrediction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub metrics: MetricsTable,
    pub tables: Vec<TablePredictions>,
}

/// Deterministic inference over `tables` and per-class metrics against their
/// gold labels (nodes beyond the clip limit are not scored).
pub fn evaluate<T: Scalar>(model: &HtmlLstm<T>, tables: &[LabeledTable]) -> Result<Evaluation> {
    let other = model.class_index(OTHER);
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    let mut out = Vec::with_capacity(tables.len());
    for t in tables {
        let prepared = model.prepare(&t.tree)?;
        let p = model.predict(&prepared)?;
        for (np, g) in p.iter().zip(gold_targets(&prepared, other)?) {
            pred.push(model.classes[np.class_index].as_str());
            gold.push(model.classes[g].as_str());
        }
        out.push(TablePredictions {
            table_id: t.id.clone(),
            predictions: p,
        });
    }
    Ok(Evaluation {
        metrics: evaluate_metrics(&pred, &gold, &model.classes)?,
        tables: out,
    })
}

#[cfg(test)]
mod tests;
