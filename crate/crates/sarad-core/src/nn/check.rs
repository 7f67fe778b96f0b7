//! Finite-difference verification of the analytic gradients.

#[allow(unused_imports)]
use num_traits::Float; // float math without std

use super::model::{Gradients, ModelBundle};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Central-difference step used by [`gradient_check`].
pub const FD_STEP: f64 = 1e-5;

/// Numeric parameter gradients by exhaustive central differences. The
/// model is restored to its original parameters before returning.
pub fn fd_param_gradients<F>(
    model: &mut ModelBundle,
    batch: &Tensor,
    loss_fn: &F,
    h: f64,
) -> Result<Gradients>
where
    F: Fn(&Tensor) -> Result<(f64, Tensor)>,
{
    let mut numeric = Gradients::zeros_like(model);
    let mut evals = 0usize;
    for li in 0..model.layers.len() {
        for pi in 0..model.layers[li].params.len() {
            for k in 0..model.layers[li].params[pi].len() {
                let saved = model.layers[li].params[pi].data()[k];
                model.layers[li].params[pi].data_mut()[k] = saved + h;
                let plus = eval_loss(model, batch, loss_fn, &mut evals)?;
                model.layers[li].params[pi].data_mut()[k] = saved - h;
                let minus = eval_loss(model, batch, loss_fn, &mut evals)?;
                model.layers[li].params[pi].data_mut()[k] = saved;
                numeric.0[li][pi].data_mut()[k] = (plus - minus) / (2.0 * h);
            }
        }
    }
    Ok(numeric)
}

fn eval_loss<F>(
    model: &ModelBundle,
    batch: &Tensor,
    loss_fn: &F,
    evals: &mut usize,
) -> Result<f64>
where
    F: Fn(&Tensor) -> Result<(f64, Tensor)>,
{
    let out = model.infer(batch)?;
    let (loss, _) = loss_fn(&out)?;
    let at = *evals;
    *evals += 1;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { batch: at });
    }
    Ok(loss)
}

/// Worst relative disagreement between two gradient sets, with a floor on
/// the denominator so near-zero pairs do not blow up.
pub fn max_relative_error(analytic: &Gradients, numeric: &Gradients) -> f64 {
    let mut worst: f64 = 0.0;
    for (la, ln) in analytic.0.iter().zip(&numeric.0) {
        for (ta, tn) in la.iter().zip(ln) {
            for (&a, &n) in ta.data().iter().zip(tn.data()) {
                let rel = (a - n).abs() / (a.abs() + n.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
    }
    worst
}

/// Compares analytic backpropagation against central differences over
/// every parameter and returns the worst relative error. `loss_fn` maps
/// the network output to a scalar loss and the loss gradient at the
/// output.
pub fn gradient_check<F>(model: &mut ModelBundle, batch: &Tensor, loss_fn: &F) -> Result<f64>
where
    F: Fn(&Tensor) -> Result<(f64, Tensor)>,
{
    let (out, cache) = model.forward(batch)?;
    let (loss, gout) = loss_fn(&out)?;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { batch: 0 });
    }
    let (analytic, _) = model.backward(&cache, &gout)?;
    let numeric = fd_param_gradients(model, batch, loss_fn, FD_STEP)?;
    Ok(max_relative_error(&analytic, &numeric))
}
