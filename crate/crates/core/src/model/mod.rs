//! The tree model: bidirectional node encoder, upward and downward binary
//! Tree-LSTM passes, feature combination and the softmax node classifier.

mod checkpoint;
mod classifier;
mod downward;
mod upward;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use classifier::{classify, combine_features, ClassifierParams, DropoutSpec, NodePrediction};
pub use downward::{downward_cell, downward_pass, DownwardCell, DownwardParams, Emission};
pub use upward::{upward_cell, upward_pass, State, UpwardParams};

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dom::{binarize, clip_postorder, BinaryTree, DomTree};
use crate::encoder::{encode_node, EncoderConfig, EncoderParams, IndexedNode, Vocabularies};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::derive_seed;
use crate::tensor::{ParamStore, Tape, Var};

/// What seeds the downward pass at the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SeedMode {
    #[default]
    UpwardRoot,
    Zero,
}

/// Model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Upward pass only; the downward slots of the feature are zeros.
    UpwardOnly,
    #[default]
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    /// Hidden size of both tree cells.
    pub d_hidden: usize,
    /// Width of the classifier's hidden layer.
    pub d_classifier: usize,
    pub clip_limit: usize,
    pub downward_cell: DownwardCell,
    pub seed_mode: SeedMode,
    pub variant: Variant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            d_hidden: 64,
            d_classifier: 64,
            clip_limit: 100,
            downward_cell: DownwardCell::PerChild,
            seed_mode: SeedMode::UpwardRoot,
            variant: Variant::Full,
        }
    }
}

/// Binary children of a node, as indices into a pre-order arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Links {
    pub left: Option<usize>,
    pub right: Option<usize>,
}

impl Links {
    pub fn of(btree: &BinaryTree<'_>) -> Vec<Links> {
        btree
            .nodes
            .iter()
            .map(|n| Links {
                left: n.left,
                right: n.right,
            })
            .collect()
    }
}

/// A clipped, binarized, vocabulary-indexed tree ready for the model.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTree {
    pub links: Vec<Links>,
    pub inputs: Vec<IndexedNode>,
    pub node_ids: Vec<usize>,
    pub texts: Vec<String>,
    /// Gold class index per node, when the tree is labeled.
    pub gold: Vec<Option<usize>>,
}

impl PreparedTree {
    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.gold.iter().all(Option::is_some)
    }
}

/// Tensor handles of all parameter groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Handles {
    pub encoder: EncoderParams,
    pub upward: UpwardParams,
    pub downward: DownwardParams,
    pub classifier: ClassifierParams,
}

impl Handles {
    pub fn bind<T: Scalar>(store: &ParamStore<T>) -> Result<Self> {
        Ok(Self {
            encoder: EncoderParams::bind(store)?,
            upward: UpwardParams::bind(store)?,
            downward: DownwardParams::bind(store)?,
            classifier: ClassifierParams::bind(store)?,
        })
    }
}

/// Per-tree tape outputs.
#[derive(Debug, Clone)]
pub struct TreeOutputs {
    /// Softmax output per node, in pre-order.
    pub probs: Vec<Var>,
}

#[derive(Debug, Clone)]
pub struct HtmlLstm<T> {
    pub config: ModelConfig,
    pub vocabs: Vocabularies,
    pub classes: Vec<String>,
    pub params: ParamStore<T>,
    handles: Handles,
    class_index: HashMap<String, usize>,
}

impl<T: Scalar> HtmlLstm<T> {
    /// Freshly initialized model.
    pub fn new(config: ModelConfig, vocabs: Vocabularies, classes: Vec<String>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let d_x = config.encoder.feature_dim();
        let h = config.d_hidden;
        let encoder = EncoderParams::register(&mut params, &vocabs, &config.encoder, &mut rng)?;
        let upward = UpwardParams::register(&mut params, d_x, h, &mut rng)?;
        let downward = DownwardParams::register(&mut params, d_x, h, &mut rng)?;
        let classifier = ClassifierParams::register(&mut params, 3 * h, config.d_classifier, classes.len(), &mut rng)?;
        let handles = Handles {
            encoder,
            upward,
            downward,
            classifier,
        };
        Self::assemble(config, vocabs, classes, params, handles)
    }

    /// Model around an existing parameter store (e.g. from a checkpoint).
    pub fn from_parts(config: ModelConfig, vocabs: Vocabularies, classes: Vec<String>, params: ParamStore<T>) -> Result<Self> {
        let handles = Handles::bind(&params)?;
        if handles.encoder.n_tags != vocabs.tags.len() {
            return Err(Error::ShapeMismatch(format!(
                "encoder expects {} tags, vocabulary has {}",
                handles.encoder.n_tags,
                vocabs.tags.len()
            )));
        }
        if params.get(handles.classifier.w_out).rows() != classes.len() {
            return Err(Error::ShapeMismatch("classifier width differs from the class list".into()));
        }
        Self::assemble(config, vocabs, classes, params, handles)
    }

    fn assemble(
        config: ModelConfig,
        vocabs: Vocabularies,
        classes: Vec<String>,
        params: ParamStore<T>,
        handles: Handles,
    ) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::Config("need at least 2 classes".into()));
        }
        let class_index = classes.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Ok(Self {
            config,
            vocabs,
            classes,
            params,
            handles,
            class_index,
        })
    }

    pub fn handles(&self) -> &Handles {
        &self.handles
    }

    pub fn class_index(&self, class: &str) -> Option<usize> {
        self.class_index.get(class).copied()
    }

    /// Clips, binarizes and indexes a tree. Gold labels unknown to the model
    /// are an error.
    pub fn prepare(&self, tree: &DomTree) -> Result<PreparedTree> {
        let clipped = clip_postorder(tree, self.config.clip_limit);
        let bt = binarize(&clipped);
        let links = Links::of(&bt);
        let mut inputs = Vec::with_capacity(bt.len());
        let mut node_ids = Vec::with_capacity(bt.len());
        let mut texts = Vec::with_capacity(bt.len());
        let mut gold = Vec::with_capacity(bt.len());
        for n in &bt.nodes {
            let d = n.payload;
            inputs.push(IndexedNode::new(d, &self.vocabs, self.config.encoder.max_tokens));
            node_ids.push(d.node_id);
            texts.push(d.text.clone());
            gold.push(match &d.gold_label {
                None => None,
                Some(l) => Some(self.class_index(l).ok_or_else(|| Error::ClassMismatch(l.clone()))?),
            });
        }
        Ok(PreparedTree {
            links,
            inputs,
            node_ids,
            texts,
            gold,
        })
    }

    /// Records the full forward computation on `tape`, whose parameter store
    /// must share this model's layout. `dropout` is `Some((p, seed))` in
    /// training mode.
    pub fn forward_tape(
        &self,
        tape: &mut Tape<'_, T>,
        tree: &PreparedTree,
        dropout: Option<(f64, u64)>,
    ) -> Result<TreeOutputs> {
        let h = &self.handles;
        let xs = tree
            .inputs
            .iter()
            .map(|n| encode_node(tape, n, &h.encoder))
            .collect::<Result<Vec<_>>>()?;
        let up = upward_pass(tape, &tree.links, &xs, &h.upward)?;
        let downs: Option<Vec<Emission>> = match self.config.variant {
            Variant::UpwardOnly => None,
            Variant::Full => {
                let seed = match self.config.seed_mode {
                    SeedMode::UpwardRoot => up.first().copied(),
                    SeedMode::Zero => None,
                };
                Some(downward_pass(
                    tape,
                    &tree.links,
                    &xs,
                    seed,
                    &h.downward,
                    self.config.downward_cell,
                )?)
            }
        };
        let zero = tape.zeros(self.config.d_hidden);
        let mut probs = Vec::with_capacity(tree.len());
        for i in 0..tree.len() {
            let (l, r) = match &downs {
                Some(d) => (d[i].left.h, d[i].right.h),
                None => (zero, zero),
            };
            let feat = combine_features(tape, up[i].h, l, r)?;
            let spec = dropout.map(|(p, seed)| DropoutSpec {
                p,
                seed: derive_seed(seed, &[i as u64]),
            });
            probs.push(classify(tape, feat, &h.classifier, spec)?);
        }
        Ok(TreeOutputs { probs })
    }

    /// Deterministic inference on a prepared tree.
    pub fn predict(&self, tree: &PreparedTree) -> Result<Vec<NodePrediction>> {
        let mut tape = Tape::new(&self.params);
        let out = self.forward_tape(&mut tape, tree, None)?;
        Ok(out
            .probs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let probs = tape.value(p).iter().map(|v| v.as_f64()).collect();
                NodePrediction::from_probs(tree.node_ids[i], &tree.texts[i], probs, &self.classes)
            })
            .collect())
    }

    /// Clip, binarize, encode and classify every node of `tree`.
    pub fn forward(&self, tree: &DomTree) -> Result<Vec<NodePrediction>> {
        self.predict(&self.prepare(tree)?)
    }
}
