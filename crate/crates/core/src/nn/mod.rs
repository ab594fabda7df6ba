//! Tensor container and the layer stack, each layer with a hand-derived
//! backward pass.

pub mod attention;
pub mod conv;
pub mod dense;
pub mod dropout;
pub mod embedding;
pub mod lstm;
pub mod model;
pub mod pool;
pub mod tensor;

#[cfg(test)]
pub(crate) mod testutil;

pub use attention::AttentionParams;
pub use conv::ConvParams;
pub use dense::DenseParams;
pub use dropout::Mode;
pub use lstm::LstmParams;
pub use model::{Architecture, ForwardCache, ModelConfig, ModelParams};
pub use tensor::Tensor;
