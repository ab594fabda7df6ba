//! The fixed layer stack and its reduced variants.
//!
//! Full stack: embedding, dropout, LSTM, attention, conv1d + ReLU, max pool,
//! flatten, dense + softmax. The variants drop layers from that chain and are
//! used as baselines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::nn::{attention, conv, dense, dropout, embedding, lstm, pool};
use crate::nn::{AttentionParams, ConvParams, DenseParams, LstmParams, Mode, Tensor};
use crate::rng;

const EMBEDDING_DROPOUT_LAYER: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// Embedding, dropout, LSTM, attention, conv, pool, flatten, dense.
    LstmAttentionCnn,
    /// The full stack without attention.
    LstmCnn,
    /// Embedding, dropout, LSTM; the last hidden state feeds the dense layer.
    Lstm,
    /// Embedding, dropout, conv, pool, flatten, dense.
    Cnn,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::Cnn,
        Architecture::Lstm,
        Architecture::LstmCnn,
        Architecture::LstmAttentionCnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::LstmAttentionCnn => "lstm-attention-cnn",
            Architecture::LstmCnn => "lstm-cnn",
            Architecture::Lstm => "lstm",
            Architecture::Cnn => "cnn",
        }
    }

    fn has_lstm(self) -> bool {
        !matches!(self, Architecture::Cnn)
    }

    fn has_attention(self) -> bool {
        matches!(self, Architecture::LstmAttentionCnn)
    }

    fn has_conv(self) -> bool {
        !matches!(self, Architecture::Lstm)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown architecture `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub lstm_units: usize,
    pub dropout_rate: f64,
    pub filters: usize,
    pub kernel: usize,
    pub pool: usize,
    pub classes: usize,
    pub max_len: usize,
    pub seed: u64,
    pub architecture: Architecture,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 300,
            lstm_units: 100,
            dropout_rate: 0.5,
            filters: 3,
            kernel: 8,
            pool: 2,
            classes: NUM_CLASSES,
            max_len: 512,
            seed: 0,
            architecture: Architecture::LstmAttentionCnn,
        }
    }
}

impl ModelConfig {
    /// Width of the flattened features entering the dense layer.
    pub fn dense_inputs(&self) -> usize {
        if self.architecture.has_conv() {
            (self.max_len / self.pool) * self.filters
        } else {
            self.lstm_units
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("embed_dim", self.embed_dim),
            ("lstm_units", self.lstm_units),
            ("filters", self.filters),
            ("kernel", self.kernel),
            ("pool", self.pool),
            ("classes", self.classes),
            ("max_len", self.max_len),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be positive")));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if self.architecture.has_conv() && self.max_len < self.pool {
            return Err(Error::TooShortToPool {
                length: self.max_len,
                window: self.pool,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub architecture: Architecture,
    /// `V x D`; row 0 is the padding vector.
    pub embedding: Tensor,
    pub lstm: Option<LstmParams>,
    pub attention: Option<AttentionParams>,
    pub conv: Option<ConvParams>,
    pub dense: DenseParams,
}

impl ModelParams {
    /// Fresh parameters. Each tensor draws from its own seeded stream, so
    /// variants sharing a seed share the initial values of common layers.
    pub fn init(cfg: &ModelConfig, embedding: Tensor) -> Result<Self> {
        cfg.validate()?;
        if embedding.shape().len() != 2 || embedding.dim(1) != cfg.embed_dim {
            return Err(Error::Shape {
                context: "embedding matrix",
                expected: vec![
                    embedding.shape().first().copied().unwrap_or(0),
                    cfg.embed_dim,
                ],
                actual: embedding.shape().to_vec(),
            });
        }
        let stream = |k: u64| rng::seeded(rng::mix(cfg.seed, &[0x1a7e_u64, k]));
        let arch = cfg.architecture;
        let lstm = arch
            .has_lstm()
            .then(|| LstmParams::init(cfg.embed_dim, cfg.lstm_units, &mut stream(1)));
        let attention = arch
            .has_attention()
            .then(|| AttentionParams::init(cfg.lstm_units, cfg.max_len, &mut stream(2)));
        let conv_in = if arch.has_lstm() {
            cfg.lstm_units
        } else {
            cfg.embed_dim
        };
        let conv = arch
            .has_conv()
            .then(|| ConvParams::init(cfg.kernel, conv_in, cfg.filters, &mut stream(3)));
        let dense = DenseParams::init(cfg.dense_inputs(), cfg.classes, &mut stream(4));
        Ok(ModelParams {
            architecture: arch,
            embedding,
            lstm,
            attention,
            conv,
            dense,
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.named_mut() {
            t.data_mut().fill(0.0);
        }
        z
    }

    /// Every trainable tensor with a stable dotted name, in a fixed order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("embedding".to_string(), &self.embedding)];
        if let Some(l) = &self.lstm {
            out.extend(l.named().into_iter().map(|(n, t)| (format!("lstm.{n}"), t)));
        }
        if let Some(a) = &self.attention {
            out.push(("attention.w".into(), &a.w));
            out.push(("attention.b".into(), &a.b));
        }
        if let Some(c) = &self.conv {
            out.push(("conv.kernel".into(), &c.kernel));
            out.push(("conv.bias".into(), &c.bias));
        }
        out.push(("dense.w".into(), &self.dense.w));
        out.push(("dense.b".into(), &self.dense.b));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = vec![("embedding".to_string(), &mut self.embedding)];
        if let Some(l) = &mut self.lstm {
            out.extend(
                l.named_mut()
                    .into_iter()
                    .map(|(n, t)| (format!("lstm.{n}"), t)),
            );
        }
        if let Some(a) = &mut self.attention {
            out.push(("attention.w".into(), &mut a.w));
            out.push(("attention.b".into(), &mut a.b));
        }
        if let Some(c) = &mut self.conv {
            out.push(("conv.kernel".into(), &mut c.kernel));
            out.push(("conv.bias".into(), &mut c.bias));
        }
        out.push(("dense.w".into(), &mut self.dense.w));
        out.push(("dense.b".into(), &mut self.dense.b));
        out
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.dim(0)
    }

    pub fn num_parameters(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }
}

/// Activations from one forward pass, consumed by [`backward_logits`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    architecture: Architecture,
    param_shapes: Vec<Vec<usize>>,
    indices: Vec<usize>,
    batch: usize,
    steps: usize,
    dropout_mask: Option<Vec<f64>>,
    lstm: Option<lstm::LstmCache>,
    attention: Option<attention::AttentionCache>,
    conv: Option<conv::ConvCache>,
    pool: Option<pool::PoolCache>,
    pooled_shape: Vec<usize>,
    features: Tensor,
    pub probs: Tensor,
}

fn shapes(m: &ModelParams) -> Vec<Vec<usize>> {
    m.named().iter().map(|(_, t)| t.shape().to_vec()).collect()
}

fn tripwire(t: &Tensor, layer: &str) -> Result<()> {
    t.check_finite(layer)
}

/// Runs the stack on a `batch x steps` block of token indices and returns
/// class probabilities (`batch x C`) with the cache for backpropagation.
pub fn forward(
    m: &ModelParams,
    cfg: &ModelConfig,
    indices: &[usize],
    batch: usize,
    mode: Mode,
) -> Result<ForwardCache> {
    let steps = cfg.max_len;
    if m.architecture != cfg.architecture {
        return Err(Error::InvalidArgument(format!(
            "parameters are for {}, config asks for {}",
            m.architecture, cfg.architecture
        )));
    }
    let x = embedding::forward(&m.embedding, indices, batch, steps)?;
    tripwire(&x, "embedding")?;
    let (mut x, dropout_mask) =
        dropout::forward(&x, cfg.dropout_rate, mode, EMBEDDING_DROPOUT_LAYER)?;

    let mut lstm_cache = None;
    if let Some(p) = &m.lstm {
        let (out, cache) = lstm::forward(p, &x)?;
        tripwire(&out, "lstm")?;
        x = out;
        lstm_cache = Some(cache);
    }
    let mut attention_cache = None;
    if let Some(p) = &m.attention {
        let (out, cache) = attention::forward(p, &x)?;
        tripwire(&out, "attention")?;
        x = out;
        attention_cache = Some(cache);
    }
    let (mut conv_cache, mut pool_cache) = (None, None);
    let features = if let Some(p) = &m.conv {
        let (out, cache) = conv::forward(p, &x)?;
        tripwire(&out, "conv1d")?;
        conv_cache = Some(cache);
        let (pooled, cache) = pool::forward(&out, cfg.pool)?;
        pool_cache = Some(cache);
        pooled
    } else {
        // Last time step of the LSTM sequence.
        let h = x.dim(2);
        let mut last = Vec::with_capacity(batch * h);
        for b in 0..batch {
            let at = (b * steps + steps - 1) * h;
            last.extend_from_slice(&x.data()[at..at + h]);
        }
        Tensor::from_vec(&[batch, 1, h], last)?
    };
    let pooled_shape = features.shape().to_vec();
    let width: usize = pooled_shape[1..].iter().product();
    let features = features.reshape(&[batch, width])?;
    let z = dense::logits(&m.dense, &features)?;
    tripwire(&z, "dense")?;
    let probs = dense::softmax(&z);
    tripwire(&probs, "softmax")?;
    Ok(ForwardCache {
        architecture: m.architecture,
        param_shapes: shapes(m),
        indices: indices.to_vec(),
        batch,
        steps,
        dropout_mask,
        lstm: lstm_cache,
        attention: attention_cache,
        conv: conv_cache,
        pool: pool_cache,
        pooled_shape,
        features,
        probs,
    })
}

/// Gradients of every parameter given `dL/dprobs`.
pub fn backward(m: &ModelParams, cache: &ForwardCache, d_probs: &Tensor) -> Result<ModelParams> {
    d_probs.expect_shape("probability gradient", cache.probs.shape())?;
    let d_logits = dense::softmax_backward(&cache.probs, d_probs);
    backward_logits(m, cache, &d_logits)
}

/// Gradients of every parameter given `dL/dlogits`.
pub fn backward_logits(
    m: &ModelParams,
    cache: &ForwardCache,
    d_logits: &Tensor,
) -> Result<ModelParams> {
    if cache.architecture != m.architecture || cache.param_shapes != shapes(m) {
        return Err(Error::StaleCache(
            "parameters do not match the forward pass".into(),
        ));
    }
    if d_logits.shape() != cache.probs.shape() {
        return Err(Error::StaleCache(format!(
            "gradient shape {:?} does not match output shape {:?}",
            d_logits.shape(),
            cache.probs.shape()
        )));
    }
    let mut grads = m.zeros_like();
    let (d_features, dense_grads) = dense::backward(&m.dense, &cache.features, d_logits)?;
    grads.dense = dense_grads;
    let d_pooled = d_features.reshape(&cache.pooled_shape)?;

    let mut d = if let (Some(p), Some(cc), Some(pc)) = (&m.conv, &cache.conv, &cache.pool) {
        let d_conv = pool::backward(pc, &d_pooled)?;
        let (dx, g) = conv::backward(p, cc, &d_conv)?;
        grads.conv = Some(g);
        dx
    } else {
        let h = d_pooled.dim(2);
        let mut d_seq = Tensor::zeros(&[cache.batch, cache.steps, h]);
        for b in 0..cache.batch {
            let at = (b * cache.steps + cache.steps - 1) * h;
            d_seq.data_mut()[at..at + h].copy_from_slice(d_pooled.row(b));
        }
        d_seq
    };
    if let (Some(p), Some(c)) = (&m.attention, &cache.attention) {
        let (dx, g) = attention::backward(p, c, &d)?;
        grads.attention = Some(g);
        d = dx;
    }
    if let (Some(p), Some(c)) = (&m.lstm, &cache.lstm) {
        let (dx, g) = lstm::backward(p, c, &d)?;
        grads.lstm = Some(g);
        d = dx;
    }
    let d = dropout::backward(&d, cache.dropout_mask.as_deref());
    grads.embedding = embedding::backward(&cache.indices, &d, m.vocab_size());
    Ok(grads)
}

/// Class probabilities in inference mode, evaluated in chunks.
pub fn predict_proba(
    m: &ModelParams,
    cfg: &ModelConfig,
    sequences: &[Vec<usize>],
) -> Result<Tensor> {
    const CHUNK: usize = 256;
    let mut out = Vec::with_capacity(sequences.len() * cfg.classes);
    for chunk in sequences.chunks(CHUNK) {
        let flat: Vec<usize> = chunk.iter().flatten().copied().collect();
        let cache = forward(m, cfg, &flat, chunk.len(), Mode::Infer)?;
        out.extend_from_slice(cache.probs.data());
    }
    Tensor::from_vec(&[sequences.len(), cfg.classes], out)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::random_embeddings;
    use crate::nn::testutil::{dot, max_rel_error, numeric_grad};

    fn small(arch: Architecture) -> ModelConfig {
        ModelConfig {
            embed_dim: 5,
            lstm_units: 4,
            dropout_rate: 0.5,
            filters: 2,
            kernel: 3,
            pool: 2,
            classes: 4,
            max_len: 7,
            seed: 3,
            architecture: arch,
        }
    }

    fn batch(vocab: usize, n: usize, steps: usize, seed: u64) -> Vec<usize> {
        let mut r = rng::seeded(seed);
        (0..n * steps).map(|_| rng::below(&mut r, vocab)).collect()
    }

    #[test]
    fn probability_shape_and_determinism() {
        let cfg = ModelConfig {
            embed_dim: 16,
            lstm_units: 8,
            max_len: 20,
            ..ModelConfig::default()
        };
        let m = ModelParams::init(&cfg, random_embeddings(30, 16, 1)).unwrap();
        let idx = batch(30, 2, 20, 2);
        let a = forward(&m, &cfg, &idx, 2, Mode::Infer).unwrap();
        let b = forward(&m, &cfg, &idx, 2, Mode::Infer).unwrap();
        assert_eq!(a.probs.shape(), [2, 4]);
        assert_eq!(a.probs, b.probs);
        let train = Mode::Train { seed: 5, step: 1 };
        let c = forward(&m, &cfg, &idx, 2, train).unwrap();
        let d = forward(&m, &cfg, &idx, 2, train).unwrap();
        assert_eq!(c.probs, d.probs);
        assert_ne!(a.probs, c.probs);
    }

    #[test]
    fn default_hyperparameters() {
        let cfg = ModelConfig::default();
        assert_eq!(
            (
                cfg.embed_dim,
                cfg.lstm_units,
                cfg.dropout_rate,
                cfg.filters,
                cfg.kernel,
                cfg.pool,
                cfg.classes
            ),
            (300, 100, 0.5, 3, 8, 2, 4)
        );
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        for arch in Architecture::ALL {
            let cfg = small(arch);
            let m = ModelParams::init(&cfg, random_embeddings(9, 5, 1)).unwrap();
            let idx = batch(9, 2, 7, 4);
            let cache = forward(&m, &cfg, &idx, 2, Mode::Train { seed: 1, step: 0 }).unwrap();
            let g = backward(&m, &cache, &Tensor::zeros(&[2, 4])).unwrap();
            for (name, t) in g.named() {
                assert!(t.data().iter().all(|&v| v == 0.0), "{arch} {name}");
            }
        }
    }

    #[test]
    fn duplicated_example_doubles_gradient() {
        let cfg = small(Architecture::LstmAttentionCnn);
        let m = ModelParams::init(&cfg, random_embeddings(9, 5, 1)).unwrap();
        let one = batch(9, 1, 7, 8);
        let two: Vec<usize> = one.iter().chain(&one).copied().collect();
        let up1 = Tensor::from_vec(&[1, 4], vec![0.3, -0.1, 0.2, 0.5]).unwrap();
        let up2 = Tensor::from_vec(&[2, 4], [up1.data(), up1.data()].concat()).unwrap();
        let g1 = backward(&m, &forward(&m, &cfg, &one, 1, Mode::Infer).unwrap(), &up1).unwrap();
        let g2 = backward(&m, &forward(&m, &cfg, &two, 2, Mode::Infer).unwrap(), &up2).unwrap();
        for ((name, a), (_, b)) in g1.named().into_iter().zip(g2.named()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((2.0 * x - y).abs() <= 1e-12 * (1.0 + y.abs()), "{name}");
            }
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let cfg = small(Architecture::LstmAttentionCnn);
        let m = ModelParams::init(&cfg, random_embeddings(9, 5, 1)).unwrap();
        let cache = forward(&m, &cfg, &batch(9, 2, 7, 1), 2, Mode::Infer).unwrap();
        assert!(matches!(
            backward(&m, &cache, &Tensor::zeros(&[3, 4])),
            Err(Error::Shape { .. })
        ));
        let other =
            ModelParams::init(&small(Architecture::LstmCnn), random_embeddings(9, 5, 1)).unwrap();
        assert!(matches!(
            backward_logits(&other, &cache, &Tensor::zeros(&[2, 4])),
            Err(Error::StaleCache(_))
        ));
    }

    #[test]
    fn every_variant_matches_finite_differences() {
        for arch in Architecture::ALL {
            let cfg = small(arch);
            let mut m = ModelParams::init(&cfg, random_embeddings(9, 5, 2)).unwrap();
            // Larger embeddings keep the signal well away from zero.
            for v in m.embedding.data_mut().iter_mut().skip(5) {
                *v *= 10.0;
            }
            let idx = batch(9, 2, 7, 6);
            let mode = Mode::Train { seed: 9, step: 2 };
            let up = Tensor::uniform(&[2, 4], 1.0, &mut rng::seeded(10));
            let cache = forward(&m, &cfg, &idx, 2, mode).unwrap();
            let g = backward(&m, &cache, &up).unwrap();
            let count = m.named().len();
            for k in 0..count {
                let base = m.named()[k].1.clone();
                let numeric = numeric_grad(&base, |t| {
                    let mut q = m.clone();
                    *q.named_mut()[k].1 = t.clone();
                    dot(&forward(&q, &cfg, &idx, 2, mode).unwrap().probs, &up)
                });
                let (name, analytic) = &g.named()[k];
                let mut numeric = numeric;
                if name == "embedding" {
                    // The padding row is frozen.
                    numeric.row_mut(0).fill(0.0);
                }
                let err = max_rel_error(analytic, &numeric);
                assert!(err < 1e-4, "{arch} {name}: {err:e}");
            }
        }
    }
}
