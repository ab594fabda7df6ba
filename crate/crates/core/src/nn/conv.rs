//! 1-D convolution over time with 'same' zero padding and ReLU.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    /// `k x d_in x F`.
    pub kernel: Tensor,
    pub bias: Tensor,
}

impl ConvParams {
    pub fn init(width: usize, channels: usize, filters: usize, rng: &mut Rng) -> Self {
        ConvParams {
            kernel: Tensor::glorot(
                &[width, channels, filters],
                width * channels,
                width * filters,
                rng,
            ),
            bias: Tensor::zeros(&[filters]),
        }
    }

    pub fn width(&self) -> usize {
        self.kernel.dim(0)
    }

    pub fn channels(&self) -> usize {
        self.kernel.dim(1)
    }

    pub fn filters(&self) -> usize {
        self.kernel.dim(2)
    }
}

/// Left and right padding that keep the output length equal to the input length.
pub fn same_padding(width: usize) -> (usize, usize) {
    let total = width.saturating_sub(1);
    (total / 2, total - total / 2)
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    pub input: Tensor,
    /// Pre-activation values, `B x T x F`.
    pub pre: Vec<f64>,
}

/// Pre-activation convolution, exposed for tests of the linear part.
pub fn convolve(p: &ConvParams, x: &Tensor) -> Result<Vec<f64>> {
    let (k, c_in, filters) = (p.width(), p.channels(), p.filters());
    if x.shape().len() != 3 || x.dim(2) != c_in {
        return Err(Error::Shape {
            context: "conv1d input",
            expected: vec![0, 0, c_in],
            actual: x.shape().to_vec(),
        });
    }
    p.bias.expect_shape("conv1d bias", &[filters])?;
    let (batch, steps) = (x.dim(0), x.dim(1));
    let (left, _) = same_padding(k);
    let mut pre = vec![0.0; batch * steps * filters];
    for b in 0..batch {
        for t in 0..steps {
            let out = &mut pre[(b * steps + t) * filters..(b * steps + t + 1) * filters];
            out.copy_from_slice(p.bias.data());
            for j in 0..k {
                let src = t + j;
                if src < left || src - left >= steps {
                    continue;
                }
                let xs =
                    &x.data()[(b * steps + src - left) * c_in..(b * steps + src - left + 1) * c_in];
                for (c, &xv) in xs.iter().enumerate() {
                    let taps =
                        &p.kernel.data()[(j * c_in + c) * filters..(j * c_in + c + 1) * filters];
                    for (o, &kv) in out.iter_mut().zip(taps) {
                        *o += xv * kv;
                    }
                }
            }
        }
    }
    Ok(pre)
}

pub fn forward(p: &ConvParams, x: &Tensor) -> Result<(Tensor, ConvCache)> {
    let pre = convolve(p, x)?;
    let out = pre.iter().map(|&v| v.max(0.0)).collect();
    let out = Tensor::from_vec(&[x.dim(0), x.dim(1), p.filters()], out)?;
    Ok((
        out,
        ConvCache {
            input: x.clone(),
            pre,
        },
    ))
}

pub fn backward(p: &ConvParams, cache: &ConvCache, d_out: &Tensor) -> Result<(Tensor, ConvParams)> {
    let x = &cache.input;
    let (k, c_in, filters) = (p.width(), p.channels(), p.filters());
    let (batch, steps) = (x.dim(0), x.dim(1));
    d_out.expect_shape("conv1d upstream gradient", &[batch, steps, filters])?;
    let (left, _) = same_padding(k);
    let mut dx = Tensor::zeros(x.shape());
    let mut grads = ConvParams {
        kernel: p.kernel.zeros_like(),
        bias: p.bias.zeros_like(),
    };
    let mut dpre = vec![0.0; filters];
    for b in 0..batch {
        for t in 0..steps {
            let at = (b * steps + t) * filters;
            for f in 0..filters {
                dpre[f] = if cache.pre[at + f] > 0.0 {
                    d_out.data()[at + f]
                } else {
                    0.0
                };
                grads.bias.data_mut()[f] += dpre[f];
            }
            for j in 0..k {
                let src = t + j;
                if src < left || src - left >= steps {
                    continue;
                }
                let row = (b * steps + src - left) * c_in;
                for c in 0..c_in {
                    let xv = x.data()[row + c];
                    let tap = (j * c_in + c) * filters;
                    let mut sum = 0.0;
                    for f in 0..filters {
                        grads.kernel.data_mut()[tap + f] += dpre[f] * xv;
                        sum += dpre[f] * p.kernel.data()[tap + f];
                    }
                    dx.data_mut()[row + c] += sum;
                }
            }
        }
    }
    Ok((dx, grads))
}
