use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tape::{Tape, Var};
use crate::error::Result;
use crate::scalar::Scalar;

/// Inverted-dropout mask: zeros with probability `p`, survivors scaled by
/// `1/(1-p)`. Replayable from `seed`.
pub fn dropout_mask<T: Scalar>(n: usize, p: f64, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = T::of(1.0 / (1.0 - p));
    (0..n)
        .map(|_| if rng.gen::<f64>() < p { T::zero() } else { keep })
        .collect()
}

/// Applies dropout on the tape; identity in evaluation mode or when `p == 0`.
pub fn dropout<T: Scalar>(tape: &mut Tape<'_, T>, x: Var, p: f64, seed: u64, training: bool) -> Result<Var> {
    if !training || p <= 0.0 {
        return Ok(x);
    }
    let mask = dropout_mask(tape.dim(x), p, seed);
    tape.mask(x, mask)
}

#[cfg(test)]
mod tests {
    use super::super::ParamStore;
    use super::*;

    #[test]
    fn eval_mode_and_zero_rate_are_identity() {
        let s = ParamStore::<f64>::new();
        let mut t = Tape::new(&s);
        let x = t.input(vec![1.0, 2.0, 3.0]);
        assert_eq!(dropout(&mut t, x, 0.5, 1, false).unwrap(), x);
        assert_eq!(dropout(&mut t, x, 0.0, 1, true).unwrap(), x);
    }

    #[test]
    fn same_seed_same_mask() {
        let a: Vec<f64> = dropout_mask(256, 0.5, 42);
        let b: Vec<f64> = dropout_mask(256, 0.5, 42);
        let c: Vec<f64> = dropout_mask(256, 0.5, 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|&m| m == 0.0 || m == 2.0));
        let dropped = a.iter().filter(|&&m| m == 0.0).count();
        assert!((80..176).contains(&dropped));
    }
}
