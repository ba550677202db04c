//! Adam with bias correction, and the learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Grads, ParamSet};
use crate::tensor::Element;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    /// β1 = 0.5, the adversarial-training convention.
    pub fn gan() -> Self {
        Self {
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// β1 = 0.9 for plain classification.
    pub fn classifier() -> Self {
        Self {
            beta1: 0.9,
            ..Self::gan()
        }
    }
}

/// Moment accumulators for one parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub t: u64,
}

impl<T: Element> Adam<T> {
    pub fn new(params: &ParamSet<T>, config: AdamConfig) -> Self {
        let zeros = Grads::zeros_like(params).tensors;
        Self {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    /// One update `θ ← θ − lr · m̂ / (√v̂ + ε)`. A non-finite gradient aborts
    /// the step before anything is modified.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &Grads<T>, lr: f64) -> Result<()> {
        if grads.tensors.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::Shape(format!(
                "optimizer over {} tensors given {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.tensors.len()
            )));
        }
        for ((p, g), m) in params.entries().iter().zip(&grads.tensors).zip(&self.m) {
            if p.value.len() != g.len() || m.len() != g.len() {
                return Err(Error::Shape(format!("gradient size mismatch for `{}`", p.name)));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    step: self.t + 1,
                    what: format!("gradient of `{}`", p.name),
                });
            }
        }
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let (b1, b2) = (T::lit(beta1), T::lit(beta2));
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        // lr · √c2 / c1 folds both bias corrections into one step size
        let step = T::lit(lr * c2.sqrt() / c1);
        let eps_hat = T::lit(eps * c2.sqrt());
        for (((p, g), m), v) in params
            .entries_mut()
            .iter_mut()
            .zip(&grads.tensors)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..g.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (T::one() - b1) * gi;
                v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
                p.value[i] -= step * m[i] / (v[i].sqrt() + eps_hat);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrDecay {
    None,
    /// Constant for the first half, then linearly toward zero.
    #[default]
    LinearAfterHalf,
}

impl LrDecay {
    /// Learning rate used throughout 1-based `epoch` of `epochs`. The decay
    /// phase is the last `⌊epochs/2⌋` epochs and never reaches zero.
    pub fn rate(self, base: f64, epoch: usize, epochs: usize) -> f64 {
        match self {
            LrDecay::None => base,
            LrDecay::LinearAfterHalf => {
                let decay = epochs / 2;
                let past = epoch.saturating_sub(epochs - decay) as f64;
                base * (1.0 - past / (decay as f64 + 1.0)).max(0.0)
            }
        }
    }
}
