use super::params::ParamId;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Stacked weights of a standard LSTM cell.
///
/// `w` is `[4h, in]`, `u` is `[4h, h]` and `b` is `[4h]`; the row blocks are
/// the input, forget, output and candidate gates in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmWeights {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
}

impl LstmWeights {
    pub fn hidden<T: Scalar>(&self, tape: &Tape<'_, T>) -> usize {
        tape.params().get(self.u).cols()
    }
}

/// One LSTM step: returns `(h, c)`.
pub fn lstm_cell<T: Scalar>(
    tape: &mut Tape<'_, T>,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    weights: &LstmWeights,
) -> Result<(Var, Var)> {
    let h = weights.hidden(tape);
    if tape.dim(h_prev) != h || tape.dim(c_prev) != h {
        return Err(Error::ShapeMismatch(format!(
            "lstm state lengths {} / {} for hidden size {h}",
            tape.dim(h_prev),
            tape.dim(c_prev)
        )));
    }
    let wx = tape.matvec(weights.w, x)?;
    let uh = tape.matvec(weights.u, h_prev)?;
    let b = tape.param(weights.b);
    let z = tape.add(wx, uh)?;
    let z = tape.add(z, b)?;
    let i = tape.slice(z, 0, h)?;
    let f = tape.slice(z, h, h)?;
    let o = tape.slice(z, 2 * h, h)?;
    let u = tape.slice(z, 3 * h, h)?;
    let i = tape.sigmoid(i);
    let f = tape.sigmoid(f);
    let o = tape.sigmoid(o);
    let u = tape.tanh(u);
    let iu = tape.mul(i, u)?;
    let fc = tape.mul(f, c_prev)?;
    let c = tape.add(iu, fc)?;
    let tc = tape.tanh(c);
    let h_next = tape.mul(o, tc)?;
    Ok((h_next, c))
}

#[cfg(test)]
mod tests {
    use super::super::{ParamStore, Tensor};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn weights(store: &mut ParamStore<f64>, input: usize, hidden: usize, zero: bool, seed: u64) -> LstmWeights {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mk = |shape: &[usize]| {
            let n: usize = shape.iter().product();
            let data = (0..n)
                .map(|_| if zero { 0.0 } else { rng.gen_range(-0.8..0.8) })
                .collect();
            Tensor::from_vec(shape, data).unwrap()
        };
        let w = store.insert("w", mk(&[4 * hidden, input])).unwrap();
        let u = store.insert("u", mk(&[4 * hidden, hidden])).unwrap();
        let b = store.insert("b", mk(&[4 * hidden])).unwrap();
        LstmWeights { w, u, b }
    }

    #[test]
    fn zero_weights_zero_state() {
        let mut s = ParamStore::new();
        let lw = weights(&mut s, 3, 2, true, 0);
        let mut t = Tape::new(&s);
        let x = t.input(vec![1.0, -1.0, 0.5]);
        let h0 = t.zeros(2);
        let c0 = t.zeros(2);
        let (h, c) = lstm_cell(&mut t, x, h0, c0, &lw).unwrap();
        assert_eq!(t.value(h), &[0.0, 0.0]);
        assert_eq!(t.value(c), &[0.0, 0.0]);
    }

    #[test]
    fn zero_weights_carry_half_of_cell() {
        let mut s = ParamStore::new();
        let lw = weights(&mut s, 3, 2, true, 0);
        let mut t = Tape::new(&s);
        let x = t.input(vec![1.0, -1.0, 0.5]);
        let h0 = t.input(vec![0.3, 0.9]);
        let c0 = t.input(vec![2.0, -0.6]);
        let (h, c) = lstm_cell(&mut t, x, h0, c0, &lw).unwrap();
        for (k, v) in [2.0f64, -0.6].into_iter().enumerate() {
            assert!((t.value(c)[k] - 0.5 * v).abs() < 1e-15);
            assert!((t.value(h)[k] - 0.5 * (0.5 * v).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn state_shape_is_checked() {
        let mut s = ParamStore::new();
        let lw = weights(&mut s, 3, 2, true, 0);
        let mut t = Tape::new(&s);
        let x = t.input(vec![1.0, -1.0, 0.5]);
        let h0 = t.zeros(3);
        let c0 = t.zeros(2);
        assert!(lstm_cell(&mut t, x, h0, c0, &lw).is_err());
    }

    fn cell_loss(s: &ParamStore<f64>, lw: &LstmWeights, x: &[f64], h0: &[f64], c0: &[f64]) -> (f64, super::super::ParamGrads<f64>) {
        let mut t = Tape::new(s);
        let x = t.input(x.to_vec());
        let h0 = t.input(h0.to_vec());
        let c0 = t.input(c0.to_vec());
        let (h, c) = lstm_cell(&mut t, x, h0, c0, lw).unwrap();
        let hc = t.concat(&[h, c]);
        let w: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let w = t.input(w);
        let p = t.mul(hc, w).unwrap();
        let l = t.sum(p);
        let g = t.backward(l).unwrap();
        (t.scalar(l), g.into_params())
    }

    #[test]
    fn gradients_match_finite_differences_8d() {
        let mut s = ParamStore::new();
        let lw = weights(&mut s, 8, 8, false, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h0: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c0: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let report = super::super::grad_check(
            &mut s,
            |p| Ok(cell_loss(p, &lw, &x, &h0, &c0)),
            &super::super::GradCheckConfig { samples_per_tensor: 64, ..Default::default() },
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}
