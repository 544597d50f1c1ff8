use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{ParamGrads, ParamStore};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub eps: f64,
    /// Random coordinates probed per tensor.
    pub samples_per_tensor: usize,
    /// Coordinates with the largest analytic gradient, probed in addition.
    pub top_per_tensor: usize,
    /// Denominator floor for the relative error.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            samples_per_tensor: 8,
            top_per_tensor: 4,
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    /// `(flat index, analytic, numeric)` at the worst coordinate.
    pub worst: Option<(usize, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub loss: f64,
    pub tensors: Vec<TensorCheck>,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    /// Largest error among tensors whose name starts with `prefix`, or `None`
    /// when no tensor matches.
    pub fn max_for_prefix(&self, prefix: &str) -> Option<f64> {
        self.tensors
            .iter()
            .filter(|t| t.name.starts_with(prefix))
            .map(|t| t.max_rel_error)
            .reduce(f64::max)
    }
}

/// Compares tape gradients against central finite differences on a sample of
/// coordinates of every parameter tensor.
///
/// `loss_fn` must be deterministic: it is evaluated twice at the unperturbed
/// parameters and a mismatch is reported as [`Error::NonDeterministicLoss`].
pub fn grad_check<T, F>(params: &mut ParamStore<T>, mut loss_fn: F, cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    T: Scalar,
    F: FnMut(&ParamStore<T>) -> Result<(T, ParamGrads<T>)>,
{
    let (loss, grads) = loss_fn(params)?;
    let (again, _) = loss_fn(params)?;
    if loss != again {
        return Err(Error::NonDeterministicLoss {
            first: loss.as_f64(),
            second: again.as_f64(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let eps = T::of(cfg.eps);
    let mut tensors = Vec::new();
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let n = params.get(id).len();
        let g = grads.get(id).data().to_vec();
        let mut coords: Vec<usize> = sample(&mut rng, n, cfg.samples_per_tensor.min(n)).into_vec();
        let mut by_mag: Vec<usize> = (0..n).collect();
        by_mag.sort_by(|&a, &b| g[b].abs().partial_cmp(&g[a].abs()).unwrap_or(std::cmp::Ordering::Equal));
        coords.extend(by_mag.into_iter().take(cfg.top_per_tensor));
        coords.sort_unstable();
        coords.dedup();

        let mut check = TensorCheck {
            name: params.name(id).to_string(),
            checked: coords.len(),
            max_rel_error: 0.0,
            worst: None,
        };
        for k in coords {
            let orig = params.get(id).data()[k];
            params.get_mut(id).data_mut()[k] = orig + eps;
            let (hi, _) = loss_fn(params)?;
            params.get_mut(id).data_mut()[k] = orig - eps;
            let (lo, _) = loss_fn(params)?;
            params.get_mut(id).data_mut()[k] = orig;
            let numeric = (hi - lo).as_f64() / (2.0 * cfg.eps);
            let analytic = g[k].as_f64();
            let denom = analytic.abs().max(numeric.abs()).max(cfg.floor);
            let rel = (analytic - numeric).abs() / denom;
            if check.worst.is_none() || rel > check.max_rel_error {
                check.max_rel_error = rel;
                check.worst = Some((k, analytic, numeric));
            }
        }
        tensors.push(check);
    }
    let max_rel_error = tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        loss: loss.as_f64(),
        tensors,
        max_rel_error,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{dropout, Tape, Tensor};
    use super::*;

    fn quad_store() -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.insert("a", Tensor::vector(vec![0.5, -1.25, 3.0])).unwrap();
        s.insert("b", Tensor::from_vec(&[2, 2], vec![1.0, 2.0, -0.5, 0.1]).unwrap())
            .unwrap();
        s
    }

    fn half_norm(p: &ParamStore<f64>) -> Result<(f64, ParamGrads<f64>)> {
        let mut t = Tape::new(p);
        let mut terms = Vec::new();
        for id in p.ids() {
            let v = t.param(id);
            let sq = t.mul(v, v)?;
            terms.push(t.sum(sq));
        }
        let all = t.concat(&terms);
        let s = t.sum(all);
        let l = t.affine(s, 0.5, 0.0);
        let g = t.backward(l)?;
        Ok((t.scalar(l), g.into_params()))
    }

    #[test]
    fn quadratic_is_exact() {
        let mut s = quad_store();
        let report = grad_check(&mut s, half_norm, &GradCheckConfig::default()).unwrap();
        assert!(report.max_rel_error < 1e-8, "{report:?}");
        assert_eq!(report.tensors.len(), 2);
        assert!(report.max_for_prefix("a").is_some());
        assert!(report.max_for_prefix("zz").is_none());
        // parameters restored after probing
        assert_eq!(s, quad_store());
    }

    #[test]
    fn dropout_loss_is_rejected() {
        let mut s = quad_store();
        let mut calls = 0u64;
        let noisy = |p: &ParamStore<f64>| {
            calls += 1;
            let mut t = Tape::new(p);
            let v = t.param(p.id("a").unwrap());
            let d = dropout(&mut t, v, 0.5, calls, true)?;
            let l = t.sum(d);
            let g = t.backward(l)?;
            Ok((t.scalar(l), g.into_params()))
        };
        let err = grad_check(&mut s, noisy, &GradCheckConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonDeterministicLoss { .. }));
    }
}
