use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{batch_objective, gold_targets};
use crate::dom::{random_tree, OTHER};
use crate::encoder::{EncoderConfig, Vocabularies};
use crate::error::Result;
use crate::loss::{compute_alpha, LossConfig};
use crate::model::{HtmlLstm, ModelConfig};
use crate::tensor::{grad_check, GradCheckConfig, GradCheckReport};

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Display name and parameter-name prefix of each parameter group.
pub const PARAMETER_GROUPS: [(&str, &str); 5] = [
    ("embeddings", "embed."),
    ("sequence encoder", "enc."),
    ("upward cell", "up."),
    ("downward cell", "down."),
    ("classifier", "cls."),
];

#[derive(Debug, Clone)]
pub struct ModelGradCheck {
    pub report: GradCheckReport,
    /// Worst relative error per entry of [`PARAMETER_GROUPS`].
    pub groups: Vec<(String, f64)>,
    pub max_rel_error: f64,
}

impl ModelGradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error < GRADCHECK_TOLERANCE
    }
}

/// Finite-difference check of the full training loss (focal plus soft F1,
/// dropout off, 64-bit) on `n_trees` random trees of at most `max_nodes`
/// nodes, labeled at random with `Name` or Other. Dimensions are the defaults
/// with the encoder output and hidden sizes reduced to 8.
pub fn check_model_gradients(seed: u64, n_trees: usize, max_nodes: usize) -> Result<ModelGradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let n = rng.gen_range(1..=max_nodes.max(1));
        let mut t = random_tree(&mut rng, n);
        t.fill_missing_labels(OTHER);
        trees.push(t);
    }
    let cfg = ModelConfig {
        encoder: EncoderConfig {
            d_enc: 8,
            ..EncoderConfig::default()
        },
        d_hidden: 8,
        ..ModelConfig::default()
    };
    let classes = vec!["Name".to_string(), OTHER.to_string()];
    let vocabs = Vocabularies::build(trees.iter(), 1)?;
    let model = HtmlLstm::<f64>::new(cfg, vocabs, classes, seed)?;
    let prepared = trees.iter().map(|t| model.prepare(t)).collect::<Result<Vec<_>>>()?;
    let batch: Vec<_> = prepared.iter().collect();

    let other = model.class_index(OTHER);
    let mut counts = vec![0usize; model.classes.len()];
    for t in &prepared {
        for g in gold_targets(t, other)? {
            counts[g] += 1;
        }
    }
    // a class missing from the sample keeps weight 1
    let alpha = compute_alpha(&counts.iter().map(|&c| c.max(1)).collect::<Vec<_>>())?;
    let loss_cfg = LossConfig {
        alpha: Some(alpha),
        ..LossConfig::default()
    };

    let mut params = model.params.clone();
    let report = grad_check(
        &mut params,
        |p| {
            let obj = batch_objective(&model, p, &batch, &loss_cfg, |_| None)?;
            Ok((obj.loss.loss, obj.grads))
        },
        &GradCheckConfig {
            seed,
            ..GradCheckConfig::default()
        },
    )?;
    let groups: Vec<(String, f64)> = PARAMETER_GROUPS
        .iter()
        .map(|(name, prefix)| (name.to_string(), report.max_for_prefix(prefix).unwrap_or(0.0)))
        .collect();
    Ok(ModelGradCheck {
        max_rel_error: report.max_rel_error,
        report,
        groups,
    })
}
