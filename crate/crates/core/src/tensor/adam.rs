use serde::{Deserialize, Serialize};

use super::params::{ParamGrads, ParamStore};
use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub halve_every: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub dropout_p: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            halve_every: 15,
            epochs: 50,
            minibatch: 128,
            dropout_p: 0.5,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        if !(self.alpha > 0.0) || !open(self.beta1) || !open(self.beta2) {
            return Err(Error::Config(format!(
                "invalid optimizer settings alpha={} beta1={} beta2={}",
                self.alpha, self.beta1, self.beta2
            )));
        }
        if self.halve_every == 0 || self.minibatch == 0 {
            return Err(Error::Config("halve_every and minibatch must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout_p {} not in [0, 1)", self.dropout_p)));
        }
        Ok(())
    }

    /// Step-decayed learning rate for a zero-based epoch.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.alpha / 2f64.powi((epoch / self.halve_every) as i32)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    cfg: OptimConfig,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: OptimConfig, params: &ParamStore<T>) -> Self {
        let zeros = || params.iter().map(|(_, _, t)| Tensor::zeros(t.shape())).collect();
        Self {
            cfg,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn config(&self) -> &OptimConfig {
        &self.cfg
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &ParamGrads<T>, epoch: usize) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch(format!(
                "adam state for {} tensors, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for id in params.ids() {
            let i = id.index();
            if params.get(id).shape() != grads.get(id).shape() || self.m[i].shape() != grads.get(id).shape() {
                return Err(Error::ShapeMismatch(format!(
                    "adam shapes differ for `{}`",
                    params.name(id)
                )));
            }
        }
        self.t += 1;
        let b1 = T::of(self.cfg.beta1);
        let b2 = T::of(self.cfg.beta2);
        let c1 = T::one() - T::of(self.cfg.beta1.powi(self.t as i32));
        let c2 = T::one() - T::of(self.cfg.beta2.powi(self.t as i32));
        let lr = T::of(self.cfg.learning_rate(epoch));
        let eps = T::of(self.cfg.epsilon);
        for id in params.ids() {
            let i = id.index();
            let g = grads.get(id).data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = params.get_mut(id).data_mut();
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (T::one() - b1) * g[k];
                v[k] = b2 * v[k] + (T::one() - b2) * g[k] * g[k];
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                p[k] -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.insert("p", Tensor::vector(vec![v])).unwrap();
        s
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = scalar_store(0.7);
        let g = s.zero_grads();
        let mut adam = Adam::new(OptimConfig::default(), &s);
        adam.step(&mut s, &g, 0).unwrap();
        assert_eq!(s.get(s.id("p").unwrap()).data(), &[0.7]);
    }

    #[test]
    fn first_step_moves_by_alpha() {
        let mut s = scalar_store(1.0);
        let id = s.id("p").unwrap();
        let mut g = s.zero_grads();
        g.get_mut(id).data_mut()[0] = 1.0;
        let mut adam = Adam::new(OptimConfig::default(), &s);
        adam.step(&mut s, &g, 0).unwrap();
        // m̂ = v̂ = 1, so the step is alpha / (1 + eps)
        let expected = 1.0 - 1e-2 / (1.0 + 1e-8);
        assert!((s.get(id).data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn schedule_halves_every_fifteen_epochs() {
        let cfg = OptimConfig::default();
        assert_eq!(cfg.learning_rate(0), 1e-2);
        assert_eq!(cfg.learning_rate(14), 1e-2);
        assert_eq!(cfg.learning_rate(15), 5e-3);
        assert_eq!(cfg.learning_rate(30), 2.5e-3);
        assert_eq!(cfg.learning_rate(49), 1.25e-3);
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let mut s = scalar_store(1.0);
        let mut adam = Adam::new(OptimConfig::default(), &s);
        let mut other = ParamStore::<f64>::new();
        other.insert("q", Tensor::vector(vec![1.0, 2.0])).unwrap();
        let g = other.zero_grads();
        assert!(adam.step(&mut s, &g, 0).is_err());
    }

    #[test]
    fn deterministic_steps() {
        let run = || {
            let mut s = scalar_store(0.3);
            let id = s.id("p").unwrap();
            let mut adam = Adam::new(OptimConfig::default(), &s);
            for e in 0..20 {
                let mut g = s.zero_grads();
                g.get_mut(id).data_mut()[0] = (e as f64 * 0.7).cos();
                adam.step(&mut s, &g, e).unwrap();
            }
            s.get(id).data()[0]
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }

    #[test]
    fn validation() {
        let mut cfg = OptimConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.beta1 = 1.0;
        assert!(cfg.validate().is_err());
    }
}
