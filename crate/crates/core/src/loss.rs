//! Focal loss, soft-F1 loss and their sum.
//!
//! The plain `f64` functions are the reference definitions; [`batch_loss`]
//! records the same computation on a tape to get gradients with respect to
//! the predicted distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{ParamStore, Tape, Var};

/// Lower bound applied to the true-class probability before the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Focusing exponent.
    pub gamma: f64,
    /// Per-class weights. `None` during training means "derive from the
    /// training split's class counts"; elsewhere it means all ones.
    pub alpha: Option<Vec<f64>>,
    /// Smoothing added to soft-F1 denominators.
    pub epsilon: f64,
    /// Whether the Other class takes part in the soft-F1 average.
    pub include_other: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            alpha: None,
            epsilon: 1e-8,
            include_other: true,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::Config(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if let Some(a) = &self.alpha {
            if a.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Config("alpha entries must be > 0".into()));
            }
        }
        Ok(())
    }

    fn alpha_of(&self, class: usize) -> f64 {
        self.alpha.as_ref().map_or(1.0, |a| a[class])
    }
}

fn check_distribution(probs: &[f64]) -> Result<()> {
    let s: f64 = probs.iter().sum();
    if !((s - 1.0).abs() <= 1e-6) || probs.iter().any(|&p| p < 0.0) {
        return Err(Error::InvalidDistribution(s));
    }
    Ok(())
}

fn check_target(target: usize, n: usize) -> Result<()> {
    if target >= n {
        return Err(Error::IndexOutOfRange {
            what: "target class",
            index: target,
            size: n,
        });
    }
    Ok(())
}

/// `-alpha_y (1 - p_y)^gamma log(p_y)` for the true class `y`.
pub fn focal_loss(probs: &[f64], target: usize, cfg: &LossConfig) -> Result<f64> {
    check_target(target, probs.len())?;
    check_distribution(probs)?;
    let p = probs[target];
    Ok(-cfg.alpha_of(target) * (1.0 - p).powf(cfg.gamma) * p.max(PROB_FLOOR).ln())
}

/// Inverse class frequencies scaled to sum to the number of classes.
pub fn compute_alpha(counts: &[usize]) -> Result<Vec<f64>> {
    if counts.is_empty() {
        return Err(Error::ZeroCount("no classes".into()));
    }
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(Error::ZeroCount(format!("class {i} has no training nodes")));
    }
    let inv: Vec<f64> = counts.iter().map(|&c| 1.0 / c as f64).collect();
    let total: f64 = inv.iter().sum();
    let n = counts.len() as f64;
    Ok(inv.into_iter().map(|v| v * n / total).collect())
}

fn f1_classes(n_classes: usize, other: Option<usize>, cfg: &LossConfig) -> Vec<usize> {
    (0..n_classes)
        .filter(|&c| cfg.include_other || Some(c) != other)
        .collect()
}

/// `1 - mean_c F1_c` with soft counts over every node of the batch.
/// `other` names the Other class index, used when it is excluded.
pub fn soft_f1_loss(probs: &[Vec<f64>], targets: &[usize], other: Option<usize>, cfg: &LossConfig) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if probs.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: probs.len(),
            right: targets.len(),
        });
    }
    let n = probs[0].len();
    let classes = f1_classes(n, other, cfg);
    if classes.is_empty() {
        return Err(Error::Config("soft-F1 has no classes to average".into()));
    }
    let mut f1_sum = 0.0;
    for &c in &classes {
        let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
        for (p, &t) in probs.iter().zip(targets) {
            check_target(t, p.len())?;
            let t = if t == c { 1.0 } else { 0.0 };
            tp += p[c] * t;
            fp += p[c] * (1.0 - t);
            fneg += (1.0 - p[c]) * t;
        }
        f1_sum += 2.0 * tp / (2.0 * tp + fp + fneg + cfg.epsilon);
    }
    Ok(1.0 - f1_sum / classes.len() as f64)
}

/// Mean focal loss over the batch plus the batch soft-F1 loss.
pub fn total_loss(probs: &[Vec<f64>], targets: &[usize], other: Option<usize>, cfg: &LossConfig) -> Result<f64> {
    let parts = loss_parts(probs, targets, other, cfg)?;
    Ok(parts.0 + parts.1)
}

/// `(mean focal, soft-F1)` of a batch.
pub fn loss_parts(probs: &[Vec<f64>], targets: &[usize], other: Option<usize>, cfg: &LossConfig) -> Result<(f64, f64)> {
    let f1 = soft_f1_loss(probs, targets, other, cfg)?;
    let mut focal = 0.0;
    for (p, &t) in probs.iter().zip(targets) {
        focal += focal_loss(p, t, cfg)?;
    }
    Ok((focal / probs.len() as f64, f1))
}

/// Loss value of a batch and its gradient with respect to every node's
/// probability vector.
#[derive(Debug, Clone)]
pub struct BatchLoss<T> {
    pub loss: f64,
    pub focal: f64,
    pub soft_f1: f64,
    pub grads: Vec<Vec<T>>,
}

/// Records [`total_loss`] on a scratch tape over the given distributions.
pub fn batch_loss<T: Scalar>(
    probs: &[&[T]],
    targets: &[usize],
    other: Option<usize>,
    cfg: &LossConfig,
) -> Result<BatchLoss<T>> {
    if probs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if probs.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: probs.len(),
            right: targets.len(),
        });
    }
    let n = probs[0].len();
    let classes = f1_classes(n, other, cfg);
    if classes.is_empty() {
        return Err(Error::Config("soft-F1 has no classes to average".into()));
    }
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let inputs: Vec<Var> = probs.iter().map(|p| tape.input(p.to_vec())).collect();

    let mut focal_terms = Vec::with_capacity(inputs.len());
    let mut onehot_terms = Vec::with_capacity(inputs.len());
    let mut counts = vec![T::zero(); n];
    for (&x, &t) in inputs.iter().zip(targets) {
        check_target(t, tape.dim(x))?;
        counts[t] += T::one();
        let p = tape.slice(x, t, 1)?;
        let clamped = tape.clamp_min(p, T::of(PROB_FLOOR));
        let logp = tape.log(clamped);
        let weight = T::of(-cfg.alpha_of(t));
        let term = if cfg.gamma == 0.0 {
            tape.affine(logp, weight, T::zero())
        } else {
            let q = tape.affine(p, -T::one(), T::one());
            let q = tape.pow(q, T::of(cfg.gamma));
            let m = tape.mul(q, logp)?;
            tape.affine(m, weight, T::zero())
        };
        focal_terms.push(term);
        let mut mask = vec![T::zero(); n];
        mask[t] = T::one();
        onehot_terms.push(tape.mask(x, mask)?);
    }
    let focal_all = tape.concat(&focal_terms);
    let focal_sum = tape.sum(focal_all);
    let focal = tape.affine(focal_sum, T::one() / T::of(inputs.len() as f64), T::zero());

    // 2 sTP + sFP + sFN = (sum of p_c) + (count of class c)
    let mut tp = onehot_terms[0];
    let mut mass = inputs[0];
    for i in 1..inputs.len() {
        tp = tape.add(tp, onehot_terms[i])?;
        mass = tape.add(mass, inputs[i])?;
    }
    let eps = T::of(cfg.epsilon);
    let denom_shift = tape.input(counts.iter().map(|&c| c + eps).collect());
    let denom = tape.add(mass, denom_shift)?;
    let ratio = tape.div(tp, denom)?;
    let mut select = vec![T::zero(); n];
    for &c in &classes {
        select[c] = T::one();
    }
    let f1 = tape.mask(ratio, select)?;
    let f1_sum = tape.sum(f1);
    let soft_f1 = tape.affine(f1_sum, T::of(-2.0 / classes.len() as f64), T::one());

    let total = tape.add(focal, soft_f1)?;
    let grads = tape.backward(total)?;
    Ok(BatchLoss {
        loss: tape.scalar(total).as_f64(),
        focal: tape.scalar(focal).as_f64(),
        soft_f1: tape.scalar(soft_f1).as_f64(),
        grads: inputs
            .iter()
            .map(|&x| grads.wrt(x).map_or_else(|| vec![T::zero(); n], <[T]>::to_vec))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn plain() -> LossConfig {
        LossConfig {
            gamma: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn focal_examples() {
        let cfg = LossConfig::default();
        assert_eq!(focal_loss(&[1.0, 0.0], 0, &cfg).unwrap(), 0.0);
        assert!((focal_loss(&[0.5, 0.5], 1, &plain()).unwrap() - 0.693147).abs() < 1e-6);
        let v = focal_loss(&[0.9, 0.1], 0, &cfg).unwrap();
        assert!((v - 0.01 * -(0.9f64).ln()).abs() < 1e-15);
        assert!((v - 1.0536e-3).abs() < 1e-7);
    }

    #[test]
    fn focal_rejects_non_distributions() {
        let cfg = LossConfig::default();
        assert!(matches!(focal_loss(&[0.5, 0.6], 0, &cfg), Err(Error::InvalidDistribution(_))));
        assert!(focal_loss(&[0.5, 0.5], 2, &cfg).is_err());
    }

    #[test]
    fn focal_is_finite_at_zero_probability() {
        let v = focal_loss(&[0.0, 1.0], 0, &LossConfig::default()).unwrap();
        assert!((v - -(PROB_FLOOR.ln())).abs() < 1e-9);
    }

    #[test]
    fn alpha_examples() {
        let a = compute_alpha(&[90, 10]).unwrap();
        assert!((a[0] - 0.2).abs() < 1e-12 && (a[1] - 1.8).abs() < 1e-12);
        assert_eq!(compute_alpha(&[7, 7, 7]).unwrap(), vec![1.0; 3]);
        assert_eq!(compute_alpha(&[5]).unwrap(), vec![1.0]);
        assert!(matches!(compute_alpha(&[3, 0]), Err(Error::ZeroCount(_))));
    }

    #[test]
    fn soft_f1_examples() {
        let cfg = LossConfig::default();
        let perfect = soft_f1_loss(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0, 1], None, &cfg).unwrap();
        assert!(perfect.abs() < 1e-8);
        let half = soft_f1_loss(&[vec![0.5, 0.5], vec![0.5, 0.5]], &[0, 1], None, &cfg).unwrap();
        assert!((half - 0.5).abs() < 1e-8);
        assert!(matches!(soft_f1_loss(&[], &[], None, &cfg), Err(Error::EmptyBatch)));
    }

    #[test]
    fn soft_f1_can_exclude_other() {
        let cfg = LossConfig {
            include_other: false,
            ..Default::default()
        };
        // class 0 perfect, Other (class 1) all wrong
        let probs = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let l = soft_f1_loss(&probs, &[0, 1], Some(1), &cfg).unwrap();
        // F1_0 = 2/(2+1+0)
        assert!((l - (1.0 - 2.0 / 3.0)).abs() < 1e-8);
    }

    #[test]
    fn tape_matches_reference() {
        let probs = vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6], vec![0.25, 0.5, 0.25], vec![0.0, 0.0, 1.0]];
        let targets = [0, 2, 1, 0];
        for cfg in [
            LossConfig::default(),
            plain(),
            LossConfig {
                alpha: Some(vec![0.5, 1.5, 1.0]),
                include_other: false,
                ..Default::default()
            },
        ] {
            let refs: Vec<&[f64]> = probs.iter().map(Vec::as_slice).collect();
            let b = batch_loss(&refs, &targets, Some(2), &cfg).unwrap();
            let (f, s) = loss_parts(&probs, &targets, Some(2), &cfg).unwrap();
            assert!((b.focal - f).abs() < 1e-12);
            assert!((b.soft_f1 - s).abs() < 1e-12);
            assert_eq!(b.loss, b.focal + b.soft_f1);
        }
    }

    #[test]
    fn tape_gradient_matches_finite_differences() {
        let probs = vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.2, 0.6], vec![0.3, 0.4, 0.3]];
        let targets = [0, 2, 1];
        let cfg = LossConfig {
            alpha: Some(vec![0.7, 1.1, 1.2]),
            ..Default::default()
        };
        let refs: Vec<&[f64]> = probs.iter().map(Vec::as_slice).collect();
        let b = batch_loss(&refs, &targets, Some(2), &cfg).unwrap();
        // the reference needs distributions, so move mass between two entries
        let unchecked = |p: &[Vec<f64>]| -> f64 {
            let mut focal = 0.0;
            for (q, &t) in p.iter().zip(&targets) {
                focal += -cfg.alpha_of(t) * (1.0 - q[t]).powf(cfg.gamma) * q[t].max(PROB_FLOOR).ln();
            }
            focal / p.len() as f64 + soft_f1_unchecked(p, &targets, &cfg)
        };
        let h = 1e-6;
        for i in 0..probs.len() {
            for k in 0..3 {
                let mut up = probs.clone();
                up[i][k] += h;
                let mut dn = probs.clone();
                dn[i][k] -= h;
                let num = (unchecked(&up) - unchecked(&dn)) / (2.0 * h);
                let ana = b.grads[i][k];
                assert!((num - ana).abs() / num.abs().max(ana.abs()).max(1e-6) < 1e-6, "{i} {k}: {num} {ana}");
            }
        }
    }

    fn soft_f1_unchecked(p: &[Vec<f64>], targets: &[usize], cfg: &LossConfig) -> f64 {
        let n = p[0].len();
        let mut s = 0.0;
        for c in 0..n {
            let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
            for (q, &t) in p.iter().zip(targets) {
                let t = (t == c) as u8 as f64;
                tp += q[c] * t;
                fp += q[c] * (1.0 - t);
                fneg += (1.0 - q[c]) * t;
            }
            s += 2.0 * tp / (2.0 * tp + fp + fneg + cfg.epsilon);
        }
        1.0 - s / n as f64
    }

    proptest! {
        #[test]
        fn focal_gamma_zero_is_cross_entropy(p in 1e-6f64..=1.0) {
            let v = focal_loss(&[p, 1.0 - p], 0, &plain()).unwrap();
            prop_assert!((v + p.ln()).abs() < 1e-12);
        }

        #[test]
        fn focal_decreases_in_true_probability(a in 1e-6f64..1.0, b in 1e-6f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            let cfg = LossConfig::default();
            prop_assert!(focal_loss(&[lo, 1.0 - lo], 0, &cfg).unwrap() > focal_loss(&[hi, 1.0 - hi], 0, &cfg).unwrap());
        }

        #[test]
        fn soft_f1_in_unit_interval_and_order_free(
            rows in prop::collection::vec((0.0f64..1.0, 0usize..2), 1..20)
        ) {
            let probs: Vec<Vec<f64>> = rows.iter().map(|&(p, _)| vec![p, 1.0 - p]).collect();
            let targets: Vec<usize> = rows.iter().map(|&(_, t)| t).collect();
            let cfg = LossConfig::default();
            let l = soft_f1_loss(&probs, &targets, None, &cfg).unwrap();
            prop_assert!((0.0..=1.0).contains(&l));
            let mut rp = probs.clone();
            let mut rt = targets.clone();
            rp.reverse();
            rt.reverse();
            prop_assert!((soft_f1_loss(&rp, &rt, None, &cfg).unwrap() - l).abs() < 1e-12);
        }
    }
}
