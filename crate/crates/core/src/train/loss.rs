use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Probabilities are clipped to `[PROB_CLIP, 1 - PROB_CLIP]` before the log.
pub const PROB_CLIP: f64 = 1e-7;

fn check_labels(probs: &Tensor, labels: &[usize]) -> Result<()> {
    let (batch, classes) = (probs.dim(0), probs.dim(1));
    if labels.len() != batch {
        return Err(Error::Shape {
            context: "labels",
            expected: vec![batch],
            actual: vec![labels.len()],
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} outside 0..{classes}"
        )));
    }
    Ok(())
}

/// Mean negative log-likelihood of the integer-coded targets.
pub fn sparse_cce(probs: &Tensor, labels: &[usize]) -> Result<f64> {
    check_labels(probs, labels)?;
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(b, &l)| -probs.row(b)[l].clamp(PROB_CLIP, 1.0 - PROB_CLIP).ln())
        .sum();
    Ok(total / labels.len() as f64)
}

/// Gradient of the fused softmax + cross-entropy with respect to the logits:
/// `(probs - onehot) / B`.
pub fn sparse_cce_grad_logits(probs: &Tensor, labels: &[usize]) -> Result<Tensor> {
    check_labels(probs, labels)?;
    let scale = 1.0 / labels.len() as f64;
    let mut grad = probs.clone();
    for (b, &l) in labels.iter().enumerate() {
        let row = grad.row_mut(b);
        row[l] -= 1.0;
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    Ok(grad)
}

/// Gradient with respect to the probabilities, honoring the clip.
pub fn sparse_cce_grad_probs(probs: &Tensor, labels: &[usize]) -> Result<Tensor> {
    check_labels(probs, labels)?;
    let n = labels.len() as f64;
    let mut grad = probs.zeros_like();
    for (b, &l) in labels.iter().enumerate() {
        let p = probs.row(b)[l];
        if p > PROB_CLIP && p < 1.0 - PROB_CLIP {
            grad.row_mut(b)[l] = -1.0 / (n * p);
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::dense::softmax;
    use crate::nn::testutil::{assert_grad_close, numeric_grad};
    use crate::rng;

    fn row(v: &[f64]) -> Tensor {
        Tensor::from_vec(&[1, v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn hand_values() {
        for l in 0..4 {
            assert!((sparse_cce(&row(&[0.25; 4]), &[l]).unwrap() - 4f64.ln()).abs() < 1e-15);
        }
        let certain = sparse_cce(&row(&[1.0, 0.0, 0.0, 0.0]), &[0]).unwrap();
        assert!((certain - -(1.0 - 1e-7f64).ln()).abs() < 1e-20);
        assert!((certain - 1e-7).abs() < 1e-13);
        let v = sparse_cce(&row(&[0.1, 0.2, 0.6, 0.1]), &[2]).unwrap();
        assert!((v - 0.5108256237659907).abs() < 1e-15);
        assert!(sparse_cce(&row(&[0.25; 4]), &[4]).is_err());
    }

    #[test]
    fn fused_gradient_matches_finite_differences() {
        let z = Tensor::uniform(&[3, 4], 2.0, &mut rng::seeded(1));
        let labels = [2, 0, 3];
        let probs = softmax(&z);
        let fused = sparse_cce_grad_logits(&probs, &labels).unwrap();
        let numeric = numeric_grad(&z, |z| sparse_cce(&softmax(z), &labels).unwrap());
        assert_grad_close(&fused, &numeric, 1e-6);
    }

    #[test]
    fn probability_gradient_matches_finite_differences() {
        let probs = softmax(&Tensor::uniform(&[2, 4], 1.0, &mut rng::seeded(2)));
        let labels = [1, 3];
        let analytic = sparse_cce_grad_probs(&probs, &labels).unwrap();
        let numeric = numeric_grad(&probs, |p| sparse_cce(p, &labels).unwrap());
        assert_grad_close(&analytic, &numeric, 1e-6);
    }
}
