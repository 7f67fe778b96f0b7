//! Adam optimizer with bias correction, plus the triangular cyclical
//! learning-rate schedule used by the trainers.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float; // float math without std

use super::layers::Layer;
use super::model::{Gradients, ModelBundle};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub(crate) m: Vec<Vec<Tensor>>,
    pub(crate) v: Vec<Vec<Tensor>>,
    pub step: u64,
}

impl AdamState {
    /// First-moment estimates, outer-indexed by layer.
    pub fn first_moments(&self) -> &[Vec<Tensor>] {
        &self.m
    }

    /// Second-moment estimates, outer-indexed by layer.
    pub fn second_moments(&self) -> &[Vec<Tensor>] {
        &self.v
    }

    /// Reassembles a state captured by a checkpoint. Alignment with the
    /// layer parameters is checked by [`ModelBundle::from_parts`].
    pub fn from_parts(m: Vec<Vec<Tensor>>, v: Vec<Vec<Tensor>>, step: u64) -> Self {
        Self { m, v, step }
    }

    pub fn zeros_like(layers: &[Layer]) -> Self {
        let make = || -> Vec<Vec<Tensor>> {
            layers
                .iter()
                .map(|l| {
                    l.params
                        .iter()
                        .map(|p| Tensor::zeros(p.shape().to_vec()))
                        .collect()
                })
                .collect()
        };
        Self {
            m: make(),
            v: make(),
            step: 0,
        }
    }
}

impl ModelBundle {
    /// One Adam update over all parameters. Rejects non-finite gradients,
    /// naming the offending layer.
    pub fn adam_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        if grads.0.len() != self.layers.len() {
            return Err(Error::GradientCount {
                expected: self.layers.len(),
                got: grads.0.len(),
            });
        }
        for (i, (layer, lg)) in self.layers.iter().zip(&grads.0).enumerate() {
            if layer.params.len() != lg.len() {
                return Err(Error::GradientCount {
                    expected: layer.params.len(),
                    got: lg.len(),
                });
            }
            for (p, g) in layer.params.iter().zip(lg) {
                if p.shape() != g.shape() {
                    return Err(Error::ShapeMismatch {
                        context: "gradient shape does not match parameter".into(),
                    });
                }
                if !g.is_finite() {
                    return Err(Error::NonFiniteGradient { layer: i });
                }
            }
        }
        let t = self.adam.step + 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(t as i32);
        for (li, layer) in self.layers.iter_mut().enumerate() {
            for (pi, p) in layer.params.iter_mut().enumerate() {
                let g = grads.0[li][pi].data();
                let m = self.adam.m[li][pi].data_mut();
                let v = self.adam.v[li][pi].data_mut();
                let pd = p.data_mut();
                for k in 0..pd.len() {
                    m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g[k];
                    v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g[k] * g[k];
                    let m_hat = m[k] / bc1;
                    let v_hat = v[k] / bc2;
                    pd[k] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                }
            }
        }
        self.adam.step = t;
        Ok(())
    }
}

/// Triangular cyclical learning rate: rises linearly low→high over
/// `ramp_batches` batches, then falls back over the next `ramp_batches`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    low: f64,
    high: f64,
    ramp_batches: u64,
}

impl LrSchedule {
    pub fn new(low: f64, high: f64, ramp_batches: u64) -> Result<Self> {
        if !(low > 0.0) || !(high >= low) || !high.is_finite() {
            return Err(Error::Config(alloc::format!(
                "learning-rate range [{low}, {high}] is invalid"
            )));
        }
        if ramp_batches == 0 {
            return Err(Error::Config("ramp length must be at least 1 batch".into()));
        }
        Ok(Self {
            low,
            high,
            ramp_batches,
        })
    }

    /// Constant schedule at one rate.
    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(rate, rate, 1)
    }

    pub fn lr_at(&self, batch: u64) -> f64 {
        let period = 2 * self.ramp_batches;
        let phase = batch % period;
        // Distance from the nearest cycle trough, so the endpoints are hit
        // exactly.
        let rising = phase.min(period - phase);
        let frac = rising as f64 / self.ramp_batches as f64;
        self.low * (1.0 - frac) + self.high * frac
    }
}
