use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Masks are drawn from a stream keyed by `(seed, step, layer)`.
    Train {
        seed: u64,
        step: u64,
    },
    Infer,
}

/// Inverted dropout. Returns the output and, in train mode with a positive
/// rate, the per-entry scale applied (0 or `1 / (1 - rate)`).
pub fn forward(
    x: &Tensor,
    rate: f64,
    mode: Mode,
    layer: u64,
) -> Result<(Tensor, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate {rate} outside [0, 1)"
        )));
    }
    let Mode::Train { seed, step } = mode else {
        return Ok((x.clone(), None));
    };
    if rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = 1.0 / (1.0 - rate);
    let mut r = rng::seeded(rng::mix(seed, &[step, layer]));
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if rng::unit(&mut r) < rate { 0.0 } else { keep })
        .collect();
    let mut out = x.clone();
    for (o, m) in out.data_mut().iter_mut().zip(&mask) {
        *o *= m;
    }
    Ok((out, Some(mask)))
}

pub fn backward(d_out: &Tensor, mask: Option<&[f64]>) -> Tensor {
    let mut d = d_out.clone();
    if let Some(mask) = mask {
        for (g, m) in d.data_mut().iter_mut().zip(mask) {
            *g *= m;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_cases() {
        let x = Tensor::uniform(&[3, 4], 1.0, &mut rng::seeded(0));
        let train = Mode::Train { seed: 1, step: 0 };
        assert_eq!(forward(&x, 0.0, train, 0).unwrap().0, x);
        assert_eq!(forward(&x, 0.7, Mode::Infer, 0).unwrap().0, x);
        assert!(forward(&x, 1.0, train, 0).is_err());
    }

    #[test]
    fn masks_are_keyed() {
        let x = Tensor::filled(&[64], 1.0);
        let a = forward(&x, 0.5, Mode::Train { seed: 3, step: 9 }, 0)
            .unwrap()
            .0;
        let b = forward(&x, 0.5, Mode::Train { seed: 3, step: 9 }, 0)
            .unwrap()
            .0;
        let c = forward(&x, 0.5, Mode::Train { seed: 3, step: 10 }, 0)
            .unwrap()
            .0;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn expectation_is_preserved() {
        // Monte-Carlo oracle: averaging 1e5 masks recovers the input within 1%.
        let x = Tensor::from_vec(&[4], vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let draws = 100_000u64;
        let mut mean = [0.0; 4];
        for step in 0..draws {
            let (y, _) = forward(&x, 0.5, Mode::Train { seed: 11, step }, 0).unwrap();
            for (m, v) in mean.iter_mut().zip(y.data()) {
                *m += v / draws as f64;
            }
        }
        for (m, v) in mean.iter().zip(x.data()) {
            assert!((m - v).abs() <= 0.01 * v.abs(), "{m} vs {v}");
        }
    }

    #[test]
    fn backward_applies_mask() {
        let x = Tensor::filled(&[8], 2.0);
        let (_, mask) = forward(&x, 0.5, Mode::Train { seed: 0, step: 0 }, 0).unwrap();
        let d = backward(&Tensor::filled(&[8], 1.0), mask.as_deref());
        assert_eq!(d.data(), mask.unwrap().as_slice());
    }
}
