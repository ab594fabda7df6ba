use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// `M x C`.
    pub w: Tensor,
    pub b: Tensor,
}

impl DenseParams {
    pub fn init(inputs: usize, classes: usize, rng: &mut Rng) -> Self {
        DenseParams {
            w: Tensor::glorot(&[inputs, classes], inputs, classes, rng),
            b: Tensor::zeros(&[classes]),
        }
    }
}

/// `z = v W + b` for a `B x M` input.
pub fn logits(p: &DenseParams, v: &Tensor) -> Result<Tensor> {
    let (inputs, classes) = (p.w.dim(0), p.w.dim(1));
    if v.shape().len() != 2 || v.dim(1) != inputs {
        return Err(Error::Shape {
            context: "dense input",
            expected: vec![v.shape().first().copied().unwrap_or(0), inputs],
            actual: v.shape().to_vec(),
        });
    }
    let batch = v.dim(0);
    let mut z = Tensor::zeros(&[batch, classes]);
    for b in 0..batch {
        let out = z.row_mut(b);
        out.copy_from_slice(p.b.data());
        for (m, &x) in v.row(b).iter().enumerate() {
            for (o, w) in out.iter_mut().zip(p.w.row(m)) {
                *o += x * w;
            }
        }
    }
    Ok(z)
}

/// Row-wise softmax with max subtraction.
pub fn softmax(z: &Tensor) -> Tensor {
    let mut p = z.clone();
    for b in 0..z.dim(0) {
        let row = p.row_mut(b);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    p
}

/// Maps a gradient on the probabilities to one on the logits.
pub fn softmax_backward(probs: &Tensor, d_probs: &Tensor) -> Tensor {
    let mut dz = probs.zeros_like();
    for b in 0..probs.dim(0) {
        let (p, g) = (probs.row(b), d_probs.row(b));
        let inner: f64 = p.iter().zip(g).map(|(a, c)| a * c).sum();
        for ((d, &pi), &gi) in dz.row_mut(b).iter_mut().zip(p).zip(g) {
            *d = pi * (gi - inner);
        }
    }
    dz
}

pub fn backward(p: &DenseParams, v: &Tensor, d_logits: &Tensor) -> Result<(Tensor, DenseParams)> {
    let (inputs, classes) = (p.w.dim(0), p.w.dim(1));
    let batch = v.dim(0);
    d_logits.expect_shape("dense upstream gradient", &[batch, classes])?;
    let mut grads = DenseParams {
        w: p.w.zeros_like(),
        b: p.b.zeros_like(),
    };
    let mut dv = Tensor::zeros(&[batch, inputs]);
    for b in 0..batch {
        let dz = d_logits.row(b);
        for (acc, g) in grads.b.data_mut().iter_mut().zip(dz) {
            *acc += g;
        }
        for m in 0..inputs {
            let x = v.row(b)[m];
            let mut sum = 0.0;
            for ((acc, &g), &w) in grads.w.row_mut(m).iter_mut().zip(dz).zip(p.w.row(m)) {
                *acc += x * g;
                sum += g * w;
            }
            dv.row_mut(b)[m] = sum;
        }
    }
    Ok((dv, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testutil::{assert_grad_close, dot, numeric_grad};
    use crate::rng;

    #[test]
    fn zero_weights_give_uniform() {
        let p = DenseParams {
            w: Tensor::zeros(&[5, 4]),
            b: Tensor::zeros(&[4]),
        };
        let v = Tensor::uniform(&[3, 5], 1.0, &mut rng::seeded(0));
        let probs = softmax(&logits(&p, &v).unwrap());
        assert!(probs.data().iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn hand_softmax() {
        let z = Tensor::from_vec(&[1, 4], vec![0.0, 0.0, 0.0, 3f64.ln()]).unwrap();
        let p = softmax(&z);
        for (a, b) in p.data().iter().zip([1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn large_logits_stay_finite() {
        let z = Tensor::from_vec(&[1, 3], vec![1000.0, 999.0, -1000.0]).unwrap();
        let p = softmax(&z);
        assert!(p.data().iter().all(|v| v.is_finite()));
        assert!((p.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut r = rng::seeded(2);
        let p = DenseParams {
            w: Tensor::uniform(&[6, 4], 1.0, &mut r),
            b: Tensor::uniform(&[4], 1.0, &mut r),
        };
        let v = Tensor::uniform(&[2, 6], 1.0, &mut r);
        let up = Tensor::uniform(&[2, 4], 1.0, &mut r);
        let probs = softmax(&logits(&p, &v).unwrap());
        let dz = softmax_backward(&probs, &up);
        let (dv, g) = backward(&p, &v, &dz).unwrap();
        let f = |p: &DenseParams, v: &Tensor| dot(&softmax(&logits(p, v).unwrap()), &up);
        assert_grad_close(&dv, &numeric_grad(&v, |v| f(&p, v)), 1e-6);
        let dw = numeric_grad(&p.w, |w| {
            f(
                &DenseParams {
                    w: w.clone(),
                    b: p.b.clone(),
                },
                &v,
            )
        });
        assert_grad_close(&g.w, &dw, 1e-6);
        let db = numeric_grad(&p.b, |b| {
            f(
                &DenseParams {
                    w: p.w.clone(),
                    b: b.clone(),
                },
                &v,
            )
        });
        assert_grad_close(&g.b, &db, 1e-6);
    }
}
