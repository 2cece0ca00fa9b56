//! Adam with step-milestone learning-rate halving.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::params::ParamStore;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam<S> {
    pub config: AdamConfig,
    m: Vec<Array1<S>>,
    v: Vec<Array1<S>>,
    t: i32,
}

impl<S: Scalar> Adam<S> {
    pub fn new(config: AdamConfig, params: &ParamStore<S>) -> Self {
        Self {
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut ParamStore<S>, grads: &[Array1<S>], lr: f64) {
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        let (b1, b2) = (S::of(beta1), S::of(beta2));
        let (ob1, ob2) = (S::one() - b1, S::one() - b2);
        let (step, c2, eps) = (S::of(lr / c1), S::of(c2), S::of(eps));
        for (((p, g), m), v) in params.params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((x, &g), m), v) in p.data.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + ob1 * g;
                *v = b2 * *v + ob2 * g * g;
                *x -= step * *m / ((*v / c2).sqrt() + eps);
            }
        }
    }
}

/// Learning rate `base * 0.5^k` where `k` counts milestones at or before
/// `step` (0-based step index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base: f64,
    pub milestones: Vec<usize>,
}

impl LrSchedule {
    pub fn lr_at(&self, step: usize) -> f64 {
        let halvings = self.milestones.iter().filter(|&&m| m <= step).count();
        self.base * 0.5f64.powi(halvings as i32)
    }
}
