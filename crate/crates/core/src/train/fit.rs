use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::embed::{encode, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::model::{argmax, backward_logits, forward, predict_proba};
use crate::nn::{Mode, ModelConfig, ModelParams};
use crate::rng;
use crate::train::adam::{AdamHyper, AdamState};
use crate::train::loss::{sparse_cce, sparse_cce_grad_logits};
use crate::train::metrics::Metrics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub model: ModelConfig,
    pub adam: AdamHyper,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            train_fraction: 0.8,
            seed: 0,
            model: ModelConfig::default(),
            adam: AdamHyper::default(),
        }
    }
}

/// Fixed-length index sequences with integer class targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EncodedSet {
    pub sequences: Vec<Vec<usize>>,
    pub labels: Vec<usize>,
}

impl EncodedSet {
    pub fn from_documents(docs: &[Document], vocab: &Vocabulary, max_len: usize) -> Result<Self> {
        let mut set = EncodedSet::default();
        for doc in docs {
            let label = doc
                .label
                .ok_or_else(|| Error::Unlabeled(doc.post_id.clone()))?;
            set.sequences.push(encode(&doc.tokens, vocab, max_len));
            set.labels.push(label.index());
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub heldout_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    /// Writes `epoch,loss,accuracy` rows. Values use Rust's shortest
    /// round-trip float formatting, so identical runs give identical bytes.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "epoch,loss,accuracy").map_err(io)?;
        for r in &self.epochs {
            writeln!(w, "{},{},{}", r.epoch, r.loss, r.accuracy).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Mini-batch training with a seeded shuffle per epoch. The final partial
/// batch is trained. There is no early stopping.
pub fn fit(
    cfg: &TrainConfig,
    data: &EncodedSet,
    params: ModelParams,
) -> Result<(ModelParams, History)> {
    fit_with_heldout(cfg, data, params, None)
}

/// [`fit`], also recording accuracy on `heldout` after every epoch.
pub fn fit_with_heldout(
    cfg: &TrainConfig,
    data: &EncodedSet,
    mut params: ModelParams,
    heldout: Option<&EncodedSet>,
) -> Result<(ModelParams, History)> {
    if data.is_empty() {
        return Err(Error::Empty("training set is empty".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let model = &cfg.model;
    let steps = model.max_len;
    if let Some(s) = data.sequences.iter().find(|s| s.len() != steps) {
        return Err(Error::Shape {
            context: "training sequence",
            expected: vec![steps],
            actual: vec![s.len()],
        });
    }
    let mut adam = AdamState::new(&params, cfg.adam);
    let mut history = History::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut step = 0u64;
    for epoch in 1..=cfg.epochs {
        rng::shuffle(
            &mut order,
            &mut rng::seeded(rng::mix(cfg.seed, &[0x5bf1e, epoch as u64])),
        );
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let indices: Vec<usize> = chunk
                .iter()
                .flat_map(|&i| data.sequences[i].iter().copied())
                .collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
            let mode = Mode::Train {
                seed: cfg.seed,
                step,
            };
            let cache = forward(&params, model, &indices, chunk.len(), mode)?;
            loss_sum += sparse_cce(&cache.probs, &labels)? * chunk.len() as f64;
            correct += labels
                .iter()
                .enumerate()
                .filter(|&(b, &l)| argmax(cache.probs.row(b)) == l)
                .count();
            let d_logits = sparse_cce_grad_logits(&cache.probs, &labels)?;
            let grads = backward_logits(&params, &cache, &d_logits)?;
            adam.step(&mut params, &grads)?;
            step += 1;
        }
        let heldout_accuracy = match heldout {
            Some(set) if !set.is_empty() => Some(evaluate(&params, model, set)?.accuracy),
            _ => None,
        };
        history.epochs.push(EpochRecord {
            epoch,
            loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
            heldout_accuracy,
        });
    }
    Ok((params, history))
}

pub fn predict(
    params: &ModelParams,
    cfg: &ModelConfig,
    sequences: &[Vec<usize>],
) -> Result<Vec<usize>> {
    let probs = predict_proba(params, cfg, sequences)?;
    Ok((0..sequences.len()).map(|b| argmax(probs.row(b))).collect())
}

/// Argmax predictions on `data` scored against its labels.
pub fn evaluate(params: &ModelParams, cfg: &ModelConfig, data: &EncodedSet) -> Result<Metrics> {
    let predicted = predict(params, cfg, &data.sequences)?;
    Metrics::from_predictions(&data.labels, &predicted, cfg.classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::random_embeddings;

    fn toy() -> (TrainConfig, EncodedSet, ModelParams) {
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            seed: 1,
            model: ModelConfig {
                embed_dim: 6,
                lstm_units: 5,
                filters: 2,
                kernel: 3,
                max_len: 6,
                seed: 1,
                ..ModelConfig::default()
            },
            ..TrainConfig::default()
        };
        let mut set = EncodedSet::default();
        for i in 0..10 {
            let class = i % 4;
            set.sequences
                .push(vec![0, 2 + class, 3, 2 + class, 7, 2 + class]);
            set.labels.push(class);
        }
        let params = ModelParams::init(&cfg.model, random_embeddings(8, 6, 1)).unwrap();
        (cfg, set, params)
    }

    #[test]
    fn history_has_one_row_per_epoch() {
        let (cfg, set, params) = toy();
        let (_, history) = fit(&cfg, &set, params).unwrap();
        assert_eq!(history.epochs.len(), 3);
        assert!(history
            .epochs
            .iter()
            .all(|r| r.loss.is_finite() && (0.0..=1.0).contains(&r.accuracy)));
    }

    #[test]
    fn training_is_reproducible() {
        let (cfg, set, params) = toy();
        let a = fit(&cfg, &set, params.clone()).unwrap();
        let b = fit(&cfg, &set, params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pad_row_survives_training() {
        let (cfg, set, params) = toy();
        let (trained, _) = fit(&cfg, &set, params).unwrap();
        assert!(trained.embedding.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_set_is_rejected() {
        let (cfg, _, params) = toy();
        assert!(fit(&cfg, &EncodedSet::default(), params).is_err());
    }
}
