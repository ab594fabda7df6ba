//! Per-step attention that rescales the sequence instead of summing it.
//!
//! `e = tanh(P w + b)` gives one score per step, `alpha = softmax_t(e)`, and
//! the output is `P * alpha` broadcast over the feature axis, so the layer
//! maps `B x T x d` to `B x T x d`.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// `d x 1` scoring vector.
    pub w: Tensor,
    /// `T x 1` per-position bias.
    pub b: Tensor,
}

impl AttentionParams {
    /// `w ~ N(0, 0.05^2)`, `b = 0`.
    pub fn init(features: usize, steps: usize, rng: &mut Rng) -> Self {
        AttentionParams {
            w: Tensor::normal(&[features, 1], 0.05, rng),
            b: Tensor::zeros(&[steps, 1]),
        }
    }

    pub fn zeros(features: usize, steps: usize) -> Self {
        AttentionParams {
            w: Tensor::zeros(&[features, 1]),
            b: Tensor::zeros(&[steps, 1]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    pub input: Tensor,
    /// `tanh` scores, `B x T`.
    pub scores: Vec<f64>,
    /// Softmax weights over time, `B x T`.
    pub alpha: Vec<f64>,
}

pub fn forward(p: &AttentionParams, x: &Tensor) -> Result<(Tensor, AttentionCache)> {
    let (features, steps) = (p.w.dim(0), p.b.dim(0));
    if x.shape().len() != 3 || x.dim(1) != steps || x.dim(2) != features {
        return Err(Error::Shape {
            context: "attention input",
            expected: vec![x.shape().first().copied().unwrap_or(0), steps, features],
            actual: x.shape().to_vec(),
        });
    }
    let batch = x.dim(0);
    let w = p.w.data();
    let mut scores = vec![0.0; batch * steps];
    let mut alpha = vec![0.0; batch * steps];
    let mut out = x.clone();
    for b in 0..batch {
        let rows = b * steps..(b + 1) * steps;
        for t in 0..steps {
            let xt = &x.data()[(b * steps + t) * features..(b * steps + t + 1) * features];
            let z: f64 = xt.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + p.b.data()[t];
            scores[b * steps + t] = z.tanh();
        }
        let e = &scores[rows.clone()];
        let max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let a = &mut alpha[rows];
        let mut total = 0.0;
        for (ai, &ei) in a.iter_mut().zip(e) {
            *ai = (ei - max).exp();
            total += *ai;
        }
        for ai in a.iter_mut() {
            *ai /= total;
        }
        for t in 0..steps {
            let scale = alpha[b * steps + t];
            for v in &mut out.data_mut()[(b * steps + t) * features..(b * steps + t + 1) * features]
            {
                *v *= scale;
            }
        }
    }
    Ok((
        out,
        AttentionCache {
            input: x.clone(),
            scores,
            alpha,
        },
    ))
}

pub fn backward(
    p: &AttentionParams,
    cache: &AttentionCache,
    d_out: &Tensor,
) -> Result<(Tensor, AttentionParams)> {
    let x = &cache.input;
    d_out.expect_shape("attention upstream gradient", x.shape())?;
    let (batch, steps, features) = (x.dim(0), x.dim(1), x.dim(2));
    let mut grads = AttentionParams::zeros(features, steps);
    let mut dx = Tensor::zeros(x.shape());
    let w = p.w.data();
    let mut d_alpha = vec![0.0; steps];
    for b in 0..batch {
        for t in 0..steps {
            let span = (b * steps + t) * features..(b * steps + t + 1) * features;
            let a = cache.alpha[b * steps + t];
            let (xt, gt) = (&x.data()[span.clone()], &d_out.data()[span.clone()]);
            d_alpha[t] = xt.iter().zip(gt).map(|(u, v)| u * v).sum();
            for (dxv, g) in dx.data_mut()[span].iter_mut().zip(gt) {
                *dxv = g * a;
            }
        }
        let alpha = &cache.alpha[b * steps..(b + 1) * steps];
        let inner: f64 = alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
        for t in 0..steps {
            let e = cache.scores[b * steps + t];
            let d_score = alpha[t] * (d_alpha[t] - inner);
            let d_pre = d_score * (1.0 - e * e);
            grads.b.data_mut()[t] += d_pre;
            let span = (b * steps + t) * features..(b * steps + t + 1) * features;
            let xt = &x.data()[span.clone()];
            for (dw, xv) in grads.w.data_mut().iter_mut().zip(xt) {
                *dw += d_pre * xv;
            }
            for (dxv, wv) in dx.data_mut()[span].iter_mut().zip(w) {
                *dxv += d_pre * wv;
            }
        }
    }
    Ok((dx, grads))
}
