//! Linear one-vs-rest SVM over mean word vectors.

use crate::embed::{PAD, UNK};
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng;
use crate::train::fit::EncodedSet;
use crate::train::metrics::Metrics;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    /// Initial step size; epoch `e` (1-based) uses `lr / e`.
    pub lr: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-4,
            epochs: 50,
            lr: 0.01,
            seed: 0,
        }
    }
}

/// Mean of the vectors of known tokens; zero when a sequence has none.
pub fn mean_embedding(sequence: &[usize], embedding: &Tensor) -> Vec<f64> {
    let mut acc = vec![0.0; embedding.dim(1)];
    let mut n = 0usize;
    for &i in sequence.iter().filter(|&&i| i != PAD && i != UNK) {
        for (a, v) in acc.iter_mut().zip(embedding.row(i)) {
            *a += v;
        }
        n += 1;
    }
    if n > 0 {
        for a in &mut acc {
            *a /= n as f64;
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearOvr {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LinearOvr {
    /// Subgradient descent on the L2-regularized hinge loss, one binary
    /// problem per class, sharing a seeded visiting order.
    pub fn fit(
        features: &[Vec<f64>],
        labels: &[usize],
        classes: usize,
        cfg: &SvmConfig,
    ) -> Result<Self> {
        let dim = features.first().map(Vec::len).unwrap_or(0);
        for c in 0..classes {
            if !labels.contains(&c) {
                return Err(Error::InvalidArgument(format!(
                    "class {c} has no training examples"
                )));
            }
        }
        let mut model = LinearOvr {
            weights: vec![vec![0.0; dim]; classes],
            bias: vec![0.0; classes],
        };
        let mut order: Vec<usize> = (0..features.len()).collect();
        for epoch in 1..=cfg.epochs {
            rng::shuffle(
                &mut order,
                &mut rng::seeded(rng::mix(cfg.seed, &[0x5e4, epoch as u64])),
            );
            let lr = cfg.lr / epoch as f64;
            for &i in &order {
                let x = &features[i];
                for c in 0..classes {
                    let y = if labels[i] == c { 1.0 } else { -1.0 };
                    let w = &mut model.weights[c];
                    let margin = y * (dot(w, x) + model.bias[c]);
                    let active = margin < 1.0;
                    for (wj, xj) in w.iter_mut().zip(x) {
                        let hinge = if active { y * xj } else { 0.0 };
                        *wj -= lr * (cfg.lambda * *wj - hinge);
                    }
                    if active {
                        model.bias[c] += lr * y;
                    }
                }
            }
        }
        Ok(model)
    }

    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| dot(w, x) + b)
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        crate::nn::model::argmax(&self.margins(x))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn svm_baseline(
    train: &EncodedSet,
    test: &EncodedSet,
    embedding: &Tensor,
    classes: usize,
    cfg: &SvmConfig,
) -> Result<Metrics> {
    let features = |set: &EncodedSet| -> Vec<Vec<f64>> {
        set.sequences
            .iter()
            .map(|s| mean_embedding(s, embedding))
            .collect()
    };
    let model = LinearOvr::fit(&features(train), &train.labels, classes, cfg)?;
    let predicted: Vec<usize> = features(test).iter().map(|x| model.predict(x)).collect();
    Metrics::from_predictions(&test.labels, &predicted, classes)
}
