//! Per-node input features: tag one-hot, token and part-of-speech embeddings
//! read by a bidirectional sequence LSTM.

mod vocab;

pub use vocab::{Vocab, VocabFile, Vocabularies, EMPTY, UNK};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dom::DomNode;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{gate_bias, lstm_cell, uniform_init, LstmWeights, ParamId, ParamStore, Tape, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Token embedding width.
    pub d_word: usize,
    /// Part-of-speech embedding width.
    pub d_pos: usize,
    /// Hidden size of each sequence-LSTM direction; node features have twice
    /// this length.
    pub d_enc: usize,
    /// Token sequences are cut to this many leading steps.
    pub max_tokens: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            d_word: 128,
            d_pos: 5,
            d_enc: 64,
            max_tokens: 64,
        }
    }
}

impl EncoderConfig {
    pub fn feature_dim(&self) -> usize {
        2 * self.d_enc
    }

    pub fn step_dim(&self, n_tags: usize) -> usize {
        n_tags + self.d_word + self.d_pos
    }
}

/// Handles to the encoder tensors inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderParams {
    pub content: ParamId,
    pub pos: ParamId,
    pub forward: LstmWeights,
    pub backward: LstmWeights,
    pub n_tags: usize,
}

fn lookup(store_names: &dyn Fn(&str) -> Option<ParamId>, name: &str) -> Result<ParamId> {
    store_names(name).ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))
}

impl EncoderParams {
    pub fn register<T: Scalar>(
        store: &mut ParamStore<T>,
        vocabs: &Vocabularies,
        cfg: &EncoderConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let content = store.insert("embed.content", uniform_init(rng, &[vocabs.tokens.len(), cfg.d_word]))?;
        let pos = store.insert("embed.pos", uniform_init(rng, &[vocabs.pos.len(), cfg.d_pos]))?;
        let d_in = cfg.step_dim(vocabs.tags.len());
        let h = cfg.d_enc;
        let mut lstm = |store: &mut ParamStore<T>, dir: &str| -> Result<LstmWeights> {
            Ok(LstmWeights {
                w: store.insert(&format!("enc.{dir}.W"), uniform_init(rng, &[4 * h, d_in]))?,
                u: store.insert(&format!("enc.{dir}.U"), uniform_init(rng, &[4 * h, h]))?,
                b: store.insert(&format!("enc.{dir}.b"), gate_bias(h, h..2 * h))?,
            })
        };
        let forward = lstm(store, "fwd")?;
        let backward = lstm(store, "bwd")?;
        Ok(Self {
            content,
            pos,
            forward,
            backward,
            n_tags: vocabs.tags.len(),
        })
    }

    /// Re-binds handles by name, e.g. after loading a checkpoint.
    pub fn bind<T: Scalar>(store: &ParamStore<T>) -> Result<Self> {
        let f = |n: &str| store.id(n);
        let content = lookup(&f, "embed.content")?;
        let fwd_w = lookup(&f, "enc.fwd.W")?;
        let d_word = store.get(content).cols();
        let pos = lookup(&f, "embed.pos")?;
        let d_pos = store.get(pos).cols();
        let d_in = store.get(fwd_w).cols();
        if d_in < d_word + d_pos {
            return Err(Error::ShapeMismatch("encoder input width too small".into()));
        }
        Ok(Self {
            content,
            pos,
            forward: LstmWeights {
                w: fwd_w,
                u: lookup(&f, "enc.fwd.U")?,
                b: lookup(&f, "enc.fwd.b")?,
            },
            backward: LstmWeights {
                w: lookup(&f, "enc.bwd.W")?,
                u: lookup(&f, "enc.bwd.U")?,
                b: lookup(&f, "enc.bwd.b")?,
            },
            n_tags: d_in - d_word - d_pos,
        })
    }
}

/// Vocabulary indices of one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedNode {
    pub tag: usize,
    pub tokens: Vec<usize>,
    pub pos: Vec<usize>,
}

impl IndexedNode {
    /// Looks a node up in frozen vocabularies. An empty token sequence becomes
    /// the single step `(EMPTY, EMPTY)`.
    pub fn new(node: &DomNode, vocabs: &Vocabularies, max_tokens: usize) -> Self {
        let n = node.tokens.len().min(max_tokens);
        let (tokens, pos) = if n == 0 {
            (vec![vocabs.tokens.lookup(EMPTY)], vec![vocabs.pos.lookup(EMPTY)])
        } else {
            (
                node.tokens[..n].iter().map(|t| vocabs.tokens.lookup(t)).collect(),
                node.pos_tags[..n].iter().map(|p| vocabs.pos.lookup(p)).collect(),
            )
        };
        Self {
            tag: vocabs.tags.lookup(&node.tag),
            tokens,
            pos,
        }
    }
}

/// `[onehot(tag) ‖ E_content(token) ‖ E_pos(pos)]`
pub fn embed_step<T: Scalar>(
    tape: &mut Tape<'_, T>,
    tag_idx: usize,
    token_idx: usize,
    pos_idx: usize,
    params: &EncoderParams,
) -> Result<Var> {
    if tag_idx >= params.n_tags {
        return Err(Error::IndexOutOfRange {
            what: "tag vocabulary",
            index: tag_idx,
            size: params.n_tags,
        });
    }
    let mut onehot = vec![T::zero(); params.n_tags];
    onehot[tag_idx] = T::one();
    let onehot = tape.input(onehot);
    let w = tape.gather(params.content, token_idx)?;
    let p = tape.gather(params.pos, pos_idx)?;
    Ok(tape.concat(&[onehot, w, p]))
}

/// Runs both sequence directions and concatenates their final hidden states.
pub fn encode_node<T: Scalar>(tape: &mut Tape<'_, T>, node: &IndexedNode, params: &EncoderParams) -> Result<Var> {
    if node.tokens.len() != node.pos.len() || node.tokens.is_empty() {
        return Err(Error::LengthMismatch {
            left: node.tokens.len(),
            right: node.pos.len(),
        });
    }
    let steps = node
        .tokens
        .iter()
        .zip(&node.pos)
        .map(|(&t, &p)| embed_step(tape, node.tag, t, p, params))
        .collect::<Result<Vec<_>>>()?;
    let h = params.forward.hidden(tape);
    let zero = tape.zeros(h);
    let (mut hf, mut cf) = (zero, zero);
    for &e in &steps {
        (hf, cf) = lstm_cell(tape, e, hf, cf, &params.forward)?;
    }
    let (mut hb, mut cb) = (zero, zero);
    for &e in steps.iter().rev() {
        (hb, cb) = lstm_cell(tape, e, hb, cb, &params.backward)?;
    }
    Ok(tape.concat(&[hf, hb]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::parse_html;
    use crate::tensor::{grad_check, GradCheckConfig, Tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(cfg: &EncoderConfig) -> (Vocabularies, ParamStore<f64>, EncoderParams) {
        let t = parse_html("<table><tr><th>Age</th><td>Age: 12</td><td></td></tr></table>").unwrap();
        let v = Vocabularies::build([&t], 1).unwrap();
        let mut s = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = EncoderParams::register(&mut s, &v, cfg, &mut rng).unwrap();
        (v, s, p)
    }

    #[test]
    fn step_width_and_onehot() {
        let cfg = EncoderConfig::default();
        let mut s = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut v = Vocabularies::build([&parse_html("<a></a>").unwrap()], 1).unwrap();
        // widen the tag vocabulary to 30 entries
        v.tags = {
            let mut syms = vec![UNK.to_string()];
            syms.extend((1..30).map(|i| format!("t{i}")));
            Vocabularies::from_json(&format!(
                r#"{{"tags":{},"tokens":["<unk>","<empty>"],"pos":["<unk>","<empty>"],"min_count":1}}"#,
                serde_json::to_string(&syms).unwrap()
            ))
            .unwrap()
            .tags
        };
        let p = EncoderParams::register(&mut s, &v, &cfg, &mut rng).unwrap();
        let mut t = Tape::new(&s);
        let e = embed_step(&mut t, 7, 1, 1, &p).unwrap();
        assert_eq!(t.dim(e), 163);
        let onehot: f64 = t.value(e)[..30].iter().sum();
        assert_eq!(onehot, 1.0);
        assert_eq!(t.value(e)[7], 1.0);
        let e2 = embed_step(&mut t, 7, 1, 1, &p).unwrap();
        assert_eq!(t.value(e), t.value(e2));
        assert!(embed_step(&mut t, 30, 1, 1, &p).is_err());
        assert!(embed_step(&mut t, 0, 99, 1, &p).is_err());
    }

    #[test]
    fn feature_length_and_empty_text() {
        let cfg = EncoderConfig::default();
        let (v, s, p) = setup(&cfg);
        let t = parse_html("<tr><td>Age: 12</td><td></td></tr>").unwrap();
        let mut tape = Tape::new(&s);
        for n in t.preorder() {
            let idx = IndexedNode::new(n, &v, cfg.max_tokens);
            assert!(!idx.tokens.is_empty());
            let x = encode_node(&mut tape, &idx, &p).unwrap();
            assert_eq!(tape.dim(x), 128);
        }
    }

    #[test]
    fn long_texts_are_truncated() {
        let cfg = EncoderConfig { max_tokens: 3, ..Default::default() };
        let (v, _, _) = setup(&cfg);
        let t = parse_html("<td>a b c d e f</td>").unwrap();
        assert_eq!(IndexedNode::new(&t.root, &v, cfg.max_tokens).tokens.len(), 3);
    }

    #[test]
    fn zero_weights_give_zero_features() {
        let cfg = EncoderConfig { d_enc: 6, ..Default::default() };
        let (v, mut s, p) = setup(&cfg);
        let ids: Vec<_> = s.ids().collect();
        for id in ids {
            s.get_mut(id).fill(0.0);
        }
        let t = parse_html("<td>Age: 12</td>").unwrap();
        let mut tape = Tape::new(&s);
        let x = encode_node(&mut tape, &IndexedNode::new(&t.root, &v, 64), &p).unwrap();
        assert!(tape.value(x).iter().all(|&a| a == 0.0));
    }

    #[test]
    fn reversal_swaps_directions_with_tied_weights() {
        let cfg = EncoderConfig { d_enc: 5, ..Default::default() };
        let (v, mut s, p) = setup(&cfg);
        for (a, b) in [(p.forward.w, p.backward.w), (p.forward.u, p.backward.u), (p.forward.b, p.backward.b)] {
            let copy: Tensor<f64> = s.get(a).clone();
            *s.get_mut(b) = copy;
        }
        let t = parse_html("<td>Age: 12</td>").unwrap();
        let fwd = IndexedNode::new(&t.root, &v, 64);
        let mut rev = fwd.clone();
        rev.tokens.reverse();
        rev.pos.reverse();
        let mut tape = Tape::new(&s);
        let a = encode_node(&mut tape, &fwd, &p).unwrap();
        let b = encode_node(&mut tape, &rev, &p).unwrap();
        let (a, b) = (tape.value(a).to_vec(), tape.value(b).to_vec());
        assert_eq!(&a[..5], &b[5..]);
        assert_eq!(&a[5..], &b[..5]);
        assert_ne!(&a[..5], &a[5..]);
    }

    #[test]
    fn deterministic_and_bind() {
        let cfg = EncoderConfig { d_enc: 4, ..Default::default() };
        let (v, s, p) = setup(&cfg);
        assert_eq!(EncoderParams::bind(&s).unwrap(), p);
        let t = parse_html("<td>Age: 12</td>").unwrap();
        let idx = IndexedNode::new(&t.root, &v, 64);
        let mut t1 = Tape::new(&s);
        let mut t2 = Tape::new(&s);
        let a = encode_node(&mut t1, &idx, &p).unwrap();
        let b = encode_node(&mut t2, &idx, &p).unwrap();
        assert_eq!(t1.value(a), t2.value(b));
    }

    #[test]
    fn encoder_gradients_match_finite_differences() {
        let cfg = EncoderConfig { d_word: 6, d_pos: 3, d_enc: 4, max_tokens: 64 };
        let (v, mut s, p) = setup(&cfg);
        let t = parse_html("<td>Age: 12</td>").unwrap();
        let idx = IndexedNode::new(&t.root, &v, 64);
        let loss = |st: &ParamStore<f64>| {
            let mut tape = Tape::new(st);
            let x = encode_node(&mut tape, &idx, &p)?;
            let w: Vec<f64> = (0..8).map(|i| 1.0 - 0.3 * i as f64).collect();
            let w = tape.input(w);
            let y = tape.mul(x, w)?;
            let l = tape.sum(y);
            let g = tape.backward(l)?;
            Ok((tape.scalar(l), g.into_params()))
        };
        let r = grad_check(&mut s, loss, &GradCheckConfig { samples_per_tensor: 32, ..Default::default() }).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }
}
