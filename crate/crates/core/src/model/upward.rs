use rand::Rng;

use super::Links;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{gate_bias, uniform_init, ParamId, ParamStore, Tape, Var};

/// Leaf-to-root binary cell.
///
/// `w` is `[4h, d_x]` with row blocks `(i, f, o, u)`; `b` matches it and the
/// forget block is shared by both children. `u_left` and `u_right` are
/// `[5h, h]`, applied to the left and right child's hidden state, with row
/// blocks `(i, f_L, f_R, o, u)`; so `f_L` reads `U_LL h_L + U_LR h_R` and
/// `f_R` reads `U_RL h_L + U_RR h_R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpwardParams {
    pub w: ParamId,
    pub u_left: ParamId,
    pub u_right: ParamId,
    pub b: ParamId,
}

impl UpwardParams {
    pub fn register<T: Scalar>(store: &mut ParamStore<T>, d_x: usize, h: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            w: store.insert("up.W", uniform_init(rng, &[4 * h, d_x]))?,
            u_left: store.insert("up.U_L", uniform_init(rng, &[5 * h, h]))?,
            u_right: store.insert("up.U_R", uniform_init(rng, &[5 * h, h]))?,
            b: store.insert("up.b", gate_bias(h, h..2 * h))?,
        })
    }

    pub fn bind<T: Scalar>(store: &ParamStore<T>) -> Result<Self> {
        let get = |n: &str| store.id(n).ok_or_else(|| Error::Config(format!("missing parameter `{n}`")));
        Ok(Self {
            w: get("up.W")?,
            u_left: get("up.U_L")?,
            u_right: get("up.U_R")?,
            b: get("up.b")?,
        })
    }

    pub fn hidden<T: Scalar>(&self, store: &ParamStore<T>) -> usize {
        store.get(self.u_left).cols()
    }
}

/// Hidden and cell state of one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct State {
    pub h: Var,
    pub c: Var,
}

/// One upward cell evaluation; absent children contribute zero state.
pub fn upward_cell<T: Scalar>(
    tape: &mut Tape<'_, T>,
    x: Var,
    left: Option<State>,
    right: Option<State>,
    p: &UpwardParams,
) -> Result<State> {
    let h = p.hidden(tape.params());
    let wx = tape.matvec(p.w, x)?;
    let b = tape.param(p.b);
    let wx = tape.add(wx, b)?;
    let mut rec = None;
    if let Some(l) = left {
        rec = Some(tape.matvec(p.u_left, l.h)?);
    }
    if let Some(r) = right {
        let ur = tape.matvec(p.u_right, r.h)?;
        rec = Some(match rec {
            Some(ul) => tape.add(ul, ur)?,
            None => ur,
        });
    }
    let gate = |tape: &mut Tape<'_, T>, wblock: usize, ublock: usize| -> Result<Var> {
        let a = tape.slice(wx, wblock * h, h)?;
        match rec {
            Some(r) => {
                let u = tape.slice(r, ublock * h, h)?;
                tape.add(a, u)
            }
            None => Ok(a),
        }
    };
    let i = gate(tape, 0, 0)?;
    let o = gate(tape, 2, 3)?;
    let u = gate(tape, 3, 4)?;
    let i = tape.sigmoid(i);
    let o = tape.sigmoid(o);
    let u = tape.tanh(u);
    let mut c = tape.mul(i, u)?;
    if let Some(l) = left {
        let f = gate(tape, 1, 1)?;
        let f = tape.sigmoid(f);
        let fc = tape.mul(f, l.c)?;
        c = tape.add(c, fc)?;
    }
    if let Some(r) = right {
        let f = gate(tape, 1, 2)?;
        let f = tape.sigmoid(f);
        let fc = tape.mul(f, r.c)?;
        c = tape.add(c, fc)?;
    }
    let tc = tape.tanh(c);
    let hh = tape.mul(o, tc)?;
    Ok(State { h: hh, c })
}

/// Evaluates every node after both of its children. `links` must be in
/// pre-order (children after parents).
pub fn upward_pass<T: Scalar>(
    tape: &mut Tape<'_, T>,
    links: &[Links],
    xs: &[Var],
    p: &UpwardParams,
) -> Result<Vec<State>> {
    if links.len() != xs.len() {
        return Err(Error::LengthMismatch {
            left: links.len(),
            right: xs.len(),
        });
    }
    let mut states: Vec<Option<State>> = vec![None; links.len()];
    for i in (0..links.len()).rev() {
        let child = |c: Option<usize>| -> Result<Option<State>> {
            match c {
                None => Ok(None),
                Some(c) if c > i && c < links.len() => Ok(states[c]),
                Some(c) => Err(Error::ShapeMismatch(format!("link {i} -> {c} is not in pre-order"))),
            }
        };
        let (l, r) = (child(links[i].left)?, child(links[i].right)?);
        states[i] = Some(upward_cell(tape, xs[i], l, r, p)?);
    }
    Ok(states.into_iter().map(|s| s.expect("every node visited")).collect())
}
