//! Ordered layer stacks with cached forward passes and full backprop.

use alloc::vec::Vec;

use super::adam::AdamState;
use super::layers::{Layer, LayerSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// A trainable network: ordered layers, their Adam state, and the seed
/// the parameters were initialized from.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub layers: Vec<Layer>,
    pub adam: AdamState,
    pub seed: u64,
}

/// Activations captured by a forward pass, consumed by backward.
#[derive(Debug, Clone)]
pub struct Cache {
    pub(crate) inputs: Vec<Tensor>,
    pub(crate) output_shape: Vec<usize>,
}

/// Per-layer, per-parameter gradient tensors, shape-aligned with the
/// model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<Tensor>>);

impl ModelBundle {
    /// Builds a model with freshly initialized parameters. Each layer
    /// draws from its own substream of `seed`, so inserting a layer does
    /// not reshuffle the others.
    pub fn new(specs: &[LayerSpec], seed: u64) -> Self {
        let layers: Vec<Layer> = specs
            .iter()
            .enumerate()
            .map(|(i, spec)| Layer::init(spec.clone(), &CounterRng::substream(seed, i as u64)))
            .collect();
        let adam = AdamState::zeros_like(&layers);
        Self { layers, adam, seed }
    }

    /// Reassembles a bundle from checkpoint parts, validating that every
    /// layer's parameters match its spec and that the optimizer moments
    /// are shape-aligned with the parameters.
    pub fn from_parts(layers: Vec<Layer>, adam: AdamState, seed: u64) -> Result<Self> {
        for (i, layer) in layers.iter().enumerate() {
            let reference = layer.spec.init_params(&CounterRng::new(0));
            if layer.params.len() != reference.len()
                || layer
                    .params
                    .iter()
                    .zip(&reference)
                    .any(|(p, r)| p.shape() != r.shape())
            {
                return Err(Error::LayerShape {
                    layer: i,
                    context: "parameters do not match the layer spec".into(),
                });
            }
        }
        for moments in [adam.first_moments(), adam.second_moments()] {
            if moments.len() != layers.len() {
                return Err(Error::GradientCount {
                    expected: layers.len(),
                    got: moments.len(),
                });
            }
            for (i, (layer, lm)) in layers.iter().zip(moments).enumerate() {
                if layer.params.len() != lm.len()
                    || layer
                        .params
                        .iter()
                        .zip(lm)
                        .any(|(p, m)| p.shape() != m.shape())
                {
                    return Err(Error::LayerShape {
                        layer: i,
                        context: "optimizer moments do not match the parameters".into(),
                    });
                }
            }
        }
        Ok(Self { layers, adam, seed })
    }

    /// Output shape for a given input shape, validating the whole chain.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mut shape = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            shape = layer.spec.output_shape(&shape).map_err(|e| match e {
                Error::ShapeMismatch { context } => Error::LayerShape { layer: i, context },
                other => other,
            })?;
        }
        Ok(shape)
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.params.iter().map(Tensor::len).sum::<usize>())
            .sum()
    }

    /// Runs the network, returning the output and the activation cache
    /// needed for [`ModelBundle::backward`].
    pub fn forward(&self, batch: &Tensor) -> Result<(Tensor, Cache)> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer.forward(&current).map_err(|e| match e {
                Error::ShapeMismatch { context } => Error::LayerShape { layer: i, context },
                other => other,
            })?;
            inputs.push(current);
            current = next;
        }
        let cache = Cache {
            inputs,
            output_shape: current.shape().to_vec(),
        };
        Ok((current, cache))
    }

    /// Inference without keeping activations.
    pub fn infer(&self, batch: &Tensor) -> Result<Tensor> {
        let mut current = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            current = layer.forward(&current).map_err(|e| match e {
                Error::ShapeMismatch { context } => Error::LayerShape { layer: i, context },
                other => other,
            })?;
        }
        Ok(current)
    }

    /// Backpropagates `grad_out` (the loss gradient at the output)
    /// through the cached pass, returning parameter gradients and the
    /// gradient at the input.
    pub fn backward(&self, cache: &Cache, grad_out: &Tensor) -> Result<(Gradients, Tensor)> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::ShapeMismatch {
                context: "cache does not belong to this model".into(),
            });
        }
        if grad_out.shape() != cache.output_shape.as_slice() {
            return Err(Error::ShapeMismatch {
                context: "output gradient does not match the cached forward output".into(),
            });
        }
        let mut per_layer = Vec::with_capacity(self.layers.len());
        let mut grad = grad_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (pgrads, gx) = layer.backward(&cache.inputs[i], &grad).map_err(|e| match e {
                Error::ShapeMismatch { context } => Error::LayerShape { layer: i, context },
                other => other,
            })?;
            per_layer.push(pgrads);
            grad = gx;
        }
        per_layer.reverse();
        Ok((Gradients(per_layer), grad))
    }
}

impl Gradients {
    pub fn zeros_like(model: &ModelBundle) -> Self {
        Self(
            model
                .layers
                .iter()
                .map(|l| {
                    l.params
                        .iter()
                        .map(|p| Tensor::zeros(p.shape().to_vec()))
                        .collect()
                })
                .collect(),
        )
    }

    /// Accumulates another gradient set of identical layout.
    pub fn add(&mut self, other: &Gradients) -> Result<()> {
        if self.0.len() != other.0.len() {
            return Err(Error::GradientCount {
                expected: self.0.len(),
                got: other.0.len(),
            });
        }
        for (mine, theirs) in self.0.iter_mut().zip(&other.0) {
            if mine.len() != theirs.len() {
                return Err(Error::GradientCount {
                    expected: mine.len(),
                    got: theirs.len(),
                });
            }
            for (a, b) in mine.iter_mut().zip(theirs) {
                if a.shape() != b.shape() {
                    return Err(Error::ShapeMismatch {
                        context: "gradient accumulation shapes differ".into(),
                    });
                }
                for (av, bv) in a.data_mut().iter_mut().zip(b.data()) {
                    *av += bv;
                }
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.0 {
            for t in layer {
                for v in t.data_mut() {
                    *v *= factor;
                }
            }
        }
    }
}
