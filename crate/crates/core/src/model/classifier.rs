use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{dropout, uniform_init, ParamId, ParamStore, Tape, Var};

/// Two-layer softmax head: `tanh(W1 h + b1)` then `softmax(Ws · + bs)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassifierParams {
    pub w_hidden: ParamId,
    pub b_hidden: ParamId,
    pub w_out: ParamId,
    pub b_out: ParamId,
}

impl ClassifierParams {
    pub fn register<T: Scalar>(
        store: &mut ParamStore<T>,
        d_in: usize,
        d_hidden: usize,
        n_classes: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {n_classes}")));
        }
        Ok(Self {
            w_hidden: store.insert("cls.W1", uniform_init(rng, &[d_hidden, d_in]))?,
            b_hidden: store.insert("cls.b1", crate::tensor::Tensor::zeros(&[d_hidden]))?,
            w_out: store.insert("cls.Ws", uniform_init(rng, &[n_classes, d_hidden]))?,
            b_out: store.insert("cls.bs", crate::tensor::Tensor::zeros(&[n_classes]))?,
        })
    }

    pub fn bind<T: Scalar>(store: &ParamStore<T>) -> Result<Self> {
        let get = |n: &str| store.id(n).ok_or_else(|| Error::Config(format!("missing parameter `{n}`")));
        Ok(Self {
            w_hidden: get("cls.W1")?,
            b_hidden: get("cls.b1")?,
            w_out: get("cls.Ws")?,
            b_out: get("cls.bs")?,
        })
    }
}

/// `[h_up ‖ h_left_down ‖ h_right_down]`
pub fn combine_features<T: Scalar>(tape: &mut Tape<'_, T>, up: Var, left_down: Var, right_down: Var) -> Result<Var> {
    let d = tape.dim(up);
    if tape.dim(left_down) != d || tape.dim(right_down) != d {
        return Err(Error::ShapeMismatch(format!(
            "combine_features lengths {d}, {}, {}",
            tape.dim(left_down),
            tape.dim(right_down)
        )));
    }
    Ok(tape.concat(&[up, left_down, right_down]))
}

/// Dropout applied to the hidden activation while training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    pub p: f64,
    pub seed: u64,
}

/// Class distribution for one combined feature vector.
pub fn classify<T: Scalar>(
    tape: &mut Tape<'_, T>,
    features: Var,
    p: &ClassifierParams,
    dropout_spec: Option<DropoutSpec>,
) -> Result<Var> {
    let z = tape.matvec(p.w_hidden, features)?;
    let b = tape.param(p.b_hidden);
    let z = tape.add(z, b)?;
    let mut hid = tape.tanh(z);
    if let Some(d) = dropout_spec {
        hid = dropout(tape, hid, d.p, d.seed, true)?;
    }
    let logits = tape.matvec(p.w_out, hid)?;
    let bs = tape.param(p.b_out);
    let logits = tape.add(logits, bs)?;
    Ok(tape.softmax(logits))
}

/// Classifier output for one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePrediction {
    pub node_id: usize,
    pub text: String,
    pub probs: Vec<f64>,
    pub predicted: String,
    pub class_index: usize,
    /// Maximum class probability.
    pub score: f64,
}

impl NodePrediction {
    /// Argmax with ties broken toward the lowest class index.
    pub fn from_probs(node_id: usize, text: &str, probs: Vec<f64>, classes: &[String]) -> Self {
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        Self {
            node_id,
            text: text.to_string(),
            score: probs[best],
            predicted: classes[best].clone(),
            class_index: best,
            probs,
        }
    }
}
