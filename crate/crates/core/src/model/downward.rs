use rand::Rng;
use serde::{Deserialize, Serialize};

use super::upward::State;
use super::Links;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{gate_bias, uniform_init, ParamId, ParamStore, Tape, Var};

/// How the two emitted cells combine the forget gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DownwardCell {
    /// `c_m = i⊙u + f_m⊙c_in` for each side `m`.
    #[default]
    PerChild,
    /// `c_L = c_R = i⊙u + (f_L + f_R)⊙c_in`.
    Summed,
}

/// Root-to-leaf cell with one input and two outputs.
///
/// `w` is `[4h, d_x]` with row blocks `(i, f, o, u)` and `b` matches it; `u`
/// is `[6h, h]` with row blocks `(i, f_L, f_R, o_L, o_R, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DownwardParams {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
}

impl DownwardParams {
    pub fn register<T: Scalar>(store: &mut ParamStore<T>, d_x: usize, h: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            w: store.insert("down.W", uniform_init(rng, &[4 * h, d_x]))?,
            u: store.insert("down.U", uniform_init(rng, &[6 * h, h]))?,
            b: store.insert("down.b", gate_bias(h, h..2 * h))?,
        })
    }

    pub fn bind<T: Scalar>(store: &ParamStore<T>) -> Result<Self> {
        let get = |n: &str| store.id(n).ok_or_else(|| Error::Config(format!("missing parameter `{n}`")));
        Ok(Self {
            w: get("down.W")?,
            u: get("down.U")?,
            b: get("down.b")?,
        })
    }

    pub fn hidden<T: Scalar>(&self, store: &ParamStore<T>) -> usize {
        store.get(self.u).cols()
    }
}

/// States a node emits toward its left and right binary children.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emission {
    pub left: State,
    pub right: State,
}

/// One downward cell evaluation. `incoming = None` means a zero state.
pub fn downward_cell<T: Scalar>(
    tape: &mut Tape<'_, T>,
    x: Var,
    incoming: Option<State>,
    p: &DownwardParams,
    mode: DownwardCell,
) -> Result<Emission> {
    let h = p.hidden(tape.params());
    let wx = tape.matvec(p.w, x)?;
    let b = tape.param(p.b);
    let wx = tape.add(wx, b)?;
    let uh = match incoming {
        Some(s) => Some(tape.matvec(p.u, s.h)?),
        None => None,
    };
    let gate = |tape: &mut Tape<'_, T>, wblock: usize, ublock: usize| -> Result<Var> {
        let a = tape.slice(wx, wblock * h, h)?;
        match uh {
            Some(r) => {
                let u = tape.slice(r, ublock * h, h)?;
                tape.add(a, u)
            }
            None => Ok(a),
        }
    };
    let i = gate(tape, 0, 0)?;
    let i = tape.sigmoid(i);
    let u = gate(tape, 3, 5)?;
    let u = tape.tanh(u);
    let o_l = gate(tape, 2, 3)?;
    let o_l = tape.sigmoid(o_l);
    let o_r = gate(tape, 2, 4)?;
    let o_r = tape.sigmoid(o_r);
    let iu = tape.mul(i, u)?;
    let (c_l, c_r) = match incoming {
        None => (iu, iu),
        Some(s) => {
            let f_l = gate(tape, 1, 1)?;
            let f_l = tape.sigmoid(f_l);
            let f_r = gate(tape, 1, 2)?;
            let f_r = tape.sigmoid(f_r);
            match mode {
                DownwardCell::PerChild => {
                    let a = tape.mul(f_l, s.c)?;
                    let b = tape.mul(f_r, s.c)?;
                    (tape.add(iu, a)?, tape.add(iu, b)?)
                }
                DownwardCell::Summed => {
                    let f = tape.add(f_l, f_r)?;
                    let fc = tape.mul(f, s.c)?;
                    let c = tape.add(iu, fc)?;
                    (c, c)
                }
            }
        }
    };
    let t_l = tape.tanh(c_l);
    let h_l = tape.mul(o_l, t_l)?;
    let t_r = if c_r == c_l { t_l } else { tape.tanh(c_r) };
    let h_r = tape.mul(o_r, t_r)?;
    Ok(Emission {
        left: State { h: h_l, c: c_l },
        right: State { h: h_r, c: c_r },
    })
}

/// Pre-order evaluation; the root receives `root_seed` and every other node
/// its parent's emission on the matching side.
pub fn downward_pass<T: Scalar>(
    tape: &mut Tape<'_, T>,
    links: &[Links],
    xs: &[Var],
    root_seed: Option<State>,
    p: &DownwardParams,
    mode: DownwardCell,
) -> Result<Vec<Emission>> {
    if links.len() != xs.len() {
        return Err(Error::LengthMismatch {
            left: links.len(),
            right: xs.len(),
        });
    }
    let mut incoming: Vec<Option<State>> = vec![None; links.len()];
    let mut seen = vec![false; links.len()];
    let mut out = Vec::with_capacity(links.len());
    if !links.is_empty() {
        incoming[0] = root_seed;
        seen[0] = true;
    }
    for i in 0..links.len() {
        if !seen[i] {
            return Err(Error::ShapeMismatch(format!("node {i} is unreachable in pre-order")));
        }
        let e = downward_cell(tape, xs[i], incoming[i], p, mode)?;
        for (child, state) in [(links[i].left, e.left), (links[i].right, e.right)] {
            if let Some(c) = child {
                if c <= i || c >= links.len() {
                    return Err(Error::ShapeMismatch(format!("link {i} -> {c} is not in pre-order")));
                }
                incoming[c] = Some(state);
                seen[c] = true;
            }
        }
        out.push(e);
    }
    Ok(out)
}
