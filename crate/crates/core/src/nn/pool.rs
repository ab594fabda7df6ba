use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Debug, Clone)]
pub struct PoolCache {
    pub input_shape: Vec<usize>,
    /// Flat input offset of each output's maximum.
    pub argmax: Vec<usize>,
}

/// Non-overlapping max pooling over time; a trailing partial window is dropped.
/// Ties resolve to the earliest position.
pub fn forward(x: &Tensor, size: usize) -> Result<(Tensor, PoolCache)> {
    if size == 0 {
        return Err(Error::InvalidArgument(
            "pool size must be at least 1".into(),
        ));
    }
    let (batch, steps, channels) = (x.dim(0), x.dim(1), x.dim(2));
    if steps < size {
        return Err(Error::TooShortToPool {
            length: steps,
            window: size,
        });
    }
    let out_steps = steps / size;
    let mut out = Vec::with_capacity(batch * out_steps * channels);
    let mut argmax = Vec::with_capacity(out.capacity());
    for b in 0..batch {
        for w in 0..out_steps {
            for c in 0..channels {
                let mut best = (b * steps + w * size) * channels + c;
                for j in 1..size {
                    let at = (b * steps + w * size + j) * channels + c;
                    if x.data()[at] > x.data()[best] {
                        best = at;
                    }
                }
                out.push(x.data()[best]);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor::from_vec(&[batch, out_steps, channels], out)?,
        PoolCache {
            input_shape: x.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn backward(cache: &PoolCache, d_out: &Tensor) -> Result<Tensor> {
    if d_out.len() != cache.argmax.len() {
        return Err(Error::Shape {
            context: "maxpool upstream gradient",
            expected: vec![cache.argmax.len()],
            actual: d_out.shape().to_vec(),
        });
    }
    let mut dx = Tensor::zeros(&cache.input_shape);
    for (&at, &g) in cache.argmax.iter().zip(d_out.data()) {
        dx.data_mut()[at] += g;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testutil::{assert_grad_close, dot, numeric_grad};
    use crate::rng;

    fn seq(v: &[f64]) -> Tensor {
        Tensor::from_vec(&[1, v.len(), 1], v.to_vec()).unwrap()
    }

    #[test]
    fn window_max_and_remainder() {
        assert_eq!(
            forward(&seq(&[1.0, 3.0, 2.0, 5.0]), 2).unwrap().0.data(),
            [3.0, 5.0]
        );
        assert_eq!(forward(&seq(&[1.0, 3.0, 2.0]), 2).unwrap().0.data(), [3.0]);
        assert!(matches!(
            forward(&seq(&[1.0]), 2),
            Err(Error::TooShortToPool { .. })
        ));
    }

    #[test]
    fn ties_route_to_first() {
        let (_, cache) = forward(&seq(&[2.0, 2.0]), 2).unwrap();
        let dx = backward(&cache, &Tensor::filled(&[1, 1, 1], 1.0)).unwrap();
        assert_eq!(dx.data(), [1.0, 0.0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = Tensor::uniform(&[2, 7, 3], 1.0, &mut rng::seeded(5));
        let up = Tensor::uniform(&[2, 3, 3], 1.0, &mut rng::seeded(6));
        let (_, cache) = forward(&x, 2).unwrap();
        let dx = backward(&cache, &up).unwrap();
        let numeric = numeric_grad(&x, |x| dot(&forward(x, 2).unwrap().0, &up));
        assert_grad_close(&dx, &numeric, 1e-6);
    }
}
