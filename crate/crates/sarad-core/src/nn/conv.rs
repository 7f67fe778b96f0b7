//! Shared 2-D convolution arithmetic. Three primitives cover both
//! convolution layers and their gradients:
//!
//! * [`conv_forward`] applies a kernel (zero padding, exact stride fit),
//! * [`conv_adjoint`] is its transpose as a linear map of the input,
//! * [`conv_kernel_grad`] differentiates the pairing ⟨g, conv(x, K)⟩ in K.
//!
//! A transposed convolution layer is `conv_adjoint` by definition, so the
//! adjoint identity ⟨conv(x), y⟩ = ⟨x, convᵀ(y)⟩ holds exactly, not just
//! to rounding.

use alloc::format;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Spatial output side for a convolution over `input` pixels. The stride
/// must fit exactly so that the transposed geometry inverts it.
pub(crate) fn conv_output_side(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::ZeroStride);
    }
    let span = input + 2 * pad;
    if kernel == 0 || kernel > span {
        return Err(Error::ShapeMismatch {
            context: format!("kernel {kernel} does not fit input {input} with padding {pad}"),
        });
    }
    let num = span - kernel;
    if num % stride != 0 {
        return Err(Error::ShapeMismatch {
            context: format!(
                "stride {stride} does not evenly cover input {input} (kernel {kernel}, padding {pad})"
            ),
        });
    }
    Ok(num / stride + 1)
}

/// Spatial output side for a transposed convolution.
pub(crate) fn conv_transpose_output_side(
    input: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Result<usize> {
    if stride == 0 {
        return Err(Error::ZeroStride);
    }
    let grown = (input - 1) * stride + kernel;
    if input == 0 || grown <= 2 * pad {
        return Err(Error::ShapeMismatch {
            context: format!(
                "transposed geometry collapses: input {input}, kernel {kernel}, padding {pad}"
            ),
        });
    }
    Ok(grown - 2 * pad)
}

fn split4(shape: &[usize], what: &str) -> Result<(usize, usize, usize, usize)> {
    if shape.len() != 4 {
        return Err(Error::ShapeMismatch {
            context: format!("{what} must be rank 4, got {shape:?}"),
        });
    }
    Ok((shape[0], shape[1], shape[2], shape[3]))
}

/// x: [n, h, w, ci], kernel: [kh, kw, ci, co] → [n, oh, ow, co].
pub(crate) fn conv_forward(x: &Tensor, kernel: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
    let (n, h, w, ci) = split4(x.shape(), "convolution input")?;
    let (kh, kw, kci, co) = split4(kernel.shape(), "convolution kernel")?;
    if kci != ci {
        return Err(Error::ShapeMismatch {
            context: format!("kernel expects {kci} input channels, image has {ci}"),
        });
    }
    let oh = conv_output_side(h, kh, stride, pad)?;
    let ow = conv_output_side(w, kw, stride, pad)?;
    let mut out = Tensor::zeros(alloc::vec![n, oh, ow, co]);
    let xd = x.data();
    let kd = kernel.data();
    let od = out.data_mut();
    for b in 0..n {
        for oy in 0..oh {
            for ky in 0..kh {
                let iy = (oy * stride + ky) as isize - pad as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                let iy = iy as usize;
                for ox in 0..ow {
                    let obase = ((b * oh + oy) * ow + ox) * co;
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let ibase = ((b * h + iy) * w + ix as usize) * ci;
                        let kbase = (ky * kw + kx) * ci * co;
                        for c_in in 0..ci {
                            let xv = xd[ibase + c_in];
                            let krow = &kd[kbase + c_in * co..kbase + (c_in + 1) * co];
                            let orow = &mut od[obase..obase + co];
                            for (o, k) in orow.iter_mut().zip(krow) {
                                *o += xv * k;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Transpose of [`conv_forward`] in its input argument.
/// g: [n, oh, ow, co], kernel: [kh, kw, ci, co] → [n, h, w, ci].
pub(crate) fn conv_adjoint(
    g: &Tensor,
    kernel: &Tensor,
    stride: usize,
    pad: usize,
    h: usize,
    w: usize,
) -> Result<Tensor> {
    let (n, oh, ow, co) = split4(g.shape(), "adjoint input")?;
    let (kh, kw, ci, kco) = split4(kernel.shape(), "convolution kernel")?;
    if kco != co {
        return Err(Error::ShapeMismatch {
            context: format!("kernel expects {kco} output channels, gradient has {co}"),
        });
    }
    if conv_output_side(h, kh, stride, pad)? != oh || conv_output_side(w, kw, stride, pad)? != ow {
        return Err(Error::ShapeMismatch {
            context: "adjoint target size inconsistent with convolution geometry".into(),
        });
    }
    let mut out = Tensor::zeros(alloc::vec![n, h, w, ci]);
    let gd = g.data();
    let kd = kernel.data();
    let od = out.data_mut();
    for b in 0..n {
        for oy in 0..oh {
            for ky in 0..kh {
                let iy = (oy * stride + ky) as isize - pad as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                let iy = iy as usize;
                for ox in 0..ow {
                    let gbase = ((b * oh + oy) * ow + ox) * co;
                    let grow = &gd[gbase..gbase + co];
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let ibase = ((b * h + iy) * w + ix as usize) * ci;
                        let kbase = (ky * kw + kx) * ci * co;
                        for c_in in 0..ci {
                            let krow = &kd[kbase + c_in * co..kbase + (c_in + 1) * co];
                            let mut acc = 0.0;
                            for (gv, kv) in grow.iter().zip(krow) {
                                acc += gv * kv;
                            }
                            od[ibase + c_in] += acc;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradient of ⟨g, conv_forward(x, K)⟩ with respect to K.
/// x: [n, h, w, ci], g: [n, oh, ow, co] → [kh, kw, ci, co].
pub(crate) fn conv_kernel_grad(
    x: &Tensor,
    g: &Tensor,
    stride: usize,
    pad: usize,
    kh: usize,
    kw: usize,
) -> Result<Tensor> {
    let (n, h, w, ci) = split4(x.shape(), "convolution input")?;
    let (gn, oh, ow, co) = split4(g.shape(), "output gradient")?;
    if gn != n
        || conv_output_side(h, kh, stride, pad)? != oh
        || conv_output_side(w, kw, stride, pad)? != ow
    {
        return Err(Error::ShapeMismatch {
            context: "output gradient inconsistent with convolution geometry".into(),
        });
    }
    let mut out = Tensor::zeros(alloc::vec![kh, kw, ci, co]);
    let xd = x.data();
    let gd = g.data();
    let od = out.data_mut();
    for b in 0..n {
        for oy in 0..oh {
            for ky in 0..kh {
                let iy = (oy * stride + ky) as isize - pad as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                let iy = iy as usize;
                for ox in 0..ow {
                    let gbase = ((b * oh + oy) * ow + ox) * co;
                    let grow = &gd[gbase..gbase + co];
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let ibase = ((b * h + iy) * w + ix as usize) * ci;
                        let kbase = (ky * kw + kx) * ci * co;
                        for c_in in 0..ci {
                            let xv = xd[ibase + c_in];
                            if xv == 0.0 {
                                continue;
                            }
                            let krow = &mut od[kbase + c_in * co..kbase + (c_in + 1) * co];
                            for (kv, gv) in krow.iter_mut().zip(grow) {
                                *kv += xv * gv;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Per-channel sums of a [n, h, w, c] tensor, used for bias gradients.
pub(crate) fn channel_sums(g: &Tensor) -> Result<Tensor> {
    let (_, _, _, c) = split4(g.shape(), "bias gradient input")?;
    let mut out = Tensor::zeros(alloc::vec![c]);
    let od = out.data_mut();
    for (i, &v) in g.data().iter().enumerate() {
        od[i % c] += v;
    }
    Ok(out)
}
