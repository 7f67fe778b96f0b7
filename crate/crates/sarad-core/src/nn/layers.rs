//! Layer kinds with explicit forward and backward passes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float; // float math without std

use super::conv::{
    channel_sums, conv_adjoint, conv_forward, conv_kernel_grad, conv_output_side,
    conv_transpose_output_side,
};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Shape-level description of a layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Dense {
        input: usize,
        output: usize,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    TransposedConv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    LeakyRelu {
        slope: f64,
    },
    Sigmoid,
    Tanh,
    Flatten,
    Reshape {
        height: usize,
        width: usize,
        channels: usize,
    },
}

impl LayerSpec {
    /// Output shape as a function of the input shape; errors when the
    /// layer cannot accept the input.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let fail = |context: alloc::string::String| Err(Error::ShapeMismatch { context });
        match *self {
            LayerSpec::Dense { input: fi, output } => {
                if input.len() != 2 || input[1] != fi {
                    return fail(format!("dense({fi}->{output}) cannot take {input:?}"));
                }
                Ok(vec![input[0], output])
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                if input.len() != 4 || input[3] != in_channels {
                    return fail(format!("conv expects [n,h,w,{in_channels}], got {input:?}"));
                }
                let oh = conv_output_side(input[1], kernel, stride, padding)?;
                let ow = conv_output_side(input[2], kernel, stride, padding)?;
                Ok(vec![input[0], oh, ow, out_channels])
            }
            LayerSpec::TransposedConv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                if input.len() != 4 || input[3] != in_channels {
                    return fail(format!(
                        "transposed conv expects [n,h,w,{in_channels}], got {input:?}"
                    ));
                }
                let oh = conv_transpose_output_side(input[1], kernel, stride, padding)?;
                let ow = conv_transpose_output_side(input[2], kernel, stride, padding)?;
                Ok(vec![input[0], oh, ow, out_channels])
            }
            LayerSpec::LeakyRelu { .. } | LayerSpec::Sigmoid | LayerSpec::Tanh => {
                Ok(input.to_vec())
            }
            LayerSpec::Flatten => {
                if input.len() < 2 {
                    return fail(format!("flatten needs a batch dimension, got {input:?}"));
                }
                Ok(vec![input[0], input[1..].iter().product()])
            }
            LayerSpec::Reshape {
                height,
                width,
                channels,
            } => {
                if input.len() != 2 || input[1] != height * width * channels {
                    return fail(format!(
                        "reshape to [{height},{width},{channels}] cannot take {input:?}"
                    ));
                }
                Ok(vec![input[0], height, width, channels])
            }
        }
    }

    /// Parameter tensors at their initial values. Weights are uniform in
    /// ±1/√fan_in, biases zero; activations have no parameters.
    pub fn init_params(&self, rng: &CounterRng) -> Vec<Tensor> {
        let uniform = |shape: Vec<usize>, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let len: usize = shape.iter().product();
            let data: Vec<f64> = (0..len)
                .map(|k| (2.0 * rng.f64_at(k as u64) - 1.0) * bound)
                .collect();
            Tensor::new(shape, data).expect("shape matches generated data")
        };
        match *self {
            LayerSpec::Dense { input, output } => vec![
                uniform(vec![input, output], input),
                Tensor::zeros(vec![output]),
            ],
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![
                uniform(
                    vec![kernel, kernel, in_channels, out_channels],
                    kernel * kernel * in_channels,
                ),
                Tensor::zeros(vec![out_channels]),
            ],
            LayerSpec::TransposedConv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![
                // Stored as the kernel of the reverse-direction convolution,
                // so the layout is [k, k, out_channels, in_channels].
                uniform(
                    vec![kernel, kernel, out_channels, in_channels],
                    kernel * kernel * in_channels,
                ),
                Tensor::zeros(vec![out_channels]),
            ],
            _ => Vec::new(),
        }
    }
}

/// A layer instance: its spec plus parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub params: Vec<Tensor>,
}

impl Layer {
    pub fn init(spec: LayerSpec, rng: &CounterRng) -> Self {
        let params = spec.init_params(rng);
        Self { spec, params }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let out_shape = self.spec.output_shape(x.shape())?;
        match self.spec {
            LayerSpec::Dense { input: fi, output } => {
                let n = x.shape()[0];
                let w = self.params[0].data();
                let b = self.params[1].data();
                let xd = x.data();
                let mut out = Tensor::zeros(out_shape);
                let od = out.data_mut();
                for row in 0..n {
                    let orow = &mut od[row * output..(row + 1) * output];
                    orow.copy_from_slice(b);
                    for f_in in 0..fi {
                        let xv = xd[row * fi + f_in];
                        if xv == 0.0 {
                            continue;
                        }
                        let wrow = &w[f_in * output..(f_in + 1) * output];
                        for (o, wv) in orow.iter_mut().zip(wrow) {
                            *o += xv * wv;
                        }
                    }
                }
                Ok(out)
            }
            LayerSpec::Conv2d {
                stride, padding, ..
            } => {
                let mut out = conv_forward(x, &self.params[0], stride, padding)?;
                add_channel_bias(&mut out, self.params[1].data());
                Ok(out)
            }
            LayerSpec::TransposedConv2d {
                stride, padding, ..
            } => {
                let mut out =
                    conv_adjoint(x, &self.params[0], stride, padding, out_shape[1], out_shape[2])?;
                add_channel_bias(&mut out, self.params[1].data());
                Ok(out)
            }
            LayerSpec::LeakyRelu { slope } => {
                Ok(x.map(|v| if v >= 0.0 { v } else { slope * v }))
            }
            LayerSpec::Sigmoid => Ok(x.map(sigmoid)),
            LayerSpec::Tanh => Ok(x.map(|v| v.tanh())),
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => x.reshape(out_shape),
        }
    }

    /// Returns (parameter gradients, input gradient) for the upstream
    /// gradient `gy`, with `x` the input the layer saw in forward.
    pub fn backward(&self, x: &Tensor, gy: &Tensor) -> Result<(Vec<Tensor>, Tensor)> {
        let out_shape = self.spec.output_shape(x.shape())?;
        if gy.shape() != out_shape.as_slice() {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "upstream gradient {:?} does not match layer output {:?}",
                    gy.shape(),
                    out_shape
                ),
            });
        }
        match self.spec {
            LayerSpec::Dense { input: fi, output } => {
                let n = x.shape()[0];
                let w = self.params[0].data();
                let xd = x.data();
                let gd = gy.data();
                let mut gw = Tensor::zeros(vec![fi, output]);
                let mut gx = Tensor::zeros(vec![n, fi]);
                {
                    let gwd = gw.data_mut();
                    for row in 0..n {
                        let grow = &gd[row * output..(row + 1) * output];
                        for f_in in 0..fi {
                            let xv = xd[row * fi + f_in];
                            if xv != 0.0 {
                                let wgrad = &mut gwd[f_in * output..(f_in + 1) * output];
                                for (wg, gv) in wgrad.iter_mut().zip(grow) {
                                    *wg += xv * gv;
                                }
                            }
                        }
                    }
                }
                {
                    let gxd = gx.data_mut();
                    for row in 0..n {
                        let grow = &gd[row * output..(row + 1) * output];
                        for f_in in 0..fi {
                            let wrow = &w[f_in * output..(f_in + 1) * output];
                            let mut acc = 0.0;
                            for (gv, wv) in grow.iter().zip(wrow) {
                                acc += gv * wv;
                            }
                            gxd[row * fi + f_in] = acc;
                        }
                    }
                }
                let mut gb = Tensor::zeros(vec![output]);
                {
                    let gbd = gb.data_mut();
                    for (i, &v) in gd.iter().enumerate() {
                        gbd[i % output] += v;
                    }
                }
                Ok((vec![gw, gb], gx))
            }
            LayerSpec::Conv2d {
                kernel,
                stride,
                padding,
                ..
            } => {
                let gk = conv_kernel_grad(x, gy, stride, padding, kernel, kernel)?;
                let gb = channel_sums(gy)?;
                let gx = conv_adjoint(
                    gy,
                    &self.params[0],
                    stride,
                    padding,
                    x.shape()[1],
                    x.shape()[2],
                )?;
                Ok((vec![gk, gb], gx))
            }
            LayerSpec::TransposedConv2d {
                kernel,
                stride,
                padding,
                ..
            } => {
                // Forward is the adjoint of a reverse conv, so the kernel
                // gradient pairs (gy, x) with roles swapped and the input
                // gradient is the reverse conv applied to gy.
                let gk = conv_kernel_grad(gy, x, stride, padding, kernel, kernel)?;
                let gb = channel_sums(gy)?;
                let gx = conv_forward(gy, &self.params[0], stride, padding)?;
                Ok((vec![gk, gb], gx))
            }
            LayerSpec::LeakyRelu { slope } => {
                let data: Vec<f64> = x
                    .data()
                    .iter()
                    .zip(gy.data())
                    .map(|(&xv, &gv)| if xv >= 0.0 { gv } else { slope * gv })
                    .collect();
                Ok((Vec::new(), Tensor::new(x.shape().to_vec(), data)?))
            }
            LayerSpec::Sigmoid => {
                let data: Vec<f64> = x
                    .data()
                    .iter()
                    .zip(gy.data())
                    .map(|(&xv, &gv)| {
                        let y = sigmoid(xv);
                        gv * y * (1.0 - y)
                    })
                    .collect();
                Ok((Vec::new(), Tensor::new(x.shape().to_vec(), data)?))
            }
            LayerSpec::Tanh => {
                let data: Vec<f64> = x
                    .data()
                    .iter()
                    .zip(gy.data())
                    .map(|(&xv, &gv)| {
                        let t = xv.tanh();
                        gv * (1.0 - t * t)
                    })
                    .collect();
                Ok((Vec::new(), Tensor::new(x.shape().to_vec(), data)?))
            }
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => {
                Ok((Vec::new(), gy.reshape(x.shape().to_vec())?))
            }
        }
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn add_channel_bias(t: &mut Tensor, bias: &[f64]) {
    let c = bias.len();
    for (i, v) in t.data_mut().iter_mut().enumerate() {
        *v += bias[i % c];
    }
}
