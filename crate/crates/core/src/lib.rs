//! Four-level suicide-risk text classification: preprocessing, weak labeling,
//! embeddings, an LSTM-attention-CNN network with hand-written gradients,
//! Adam training, and macro-averaged evaluation.

pub mod corpus;
pub mod embed;
pub mod error;
pub mod nn;
pub mod rng;
pub mod textprep;
pub mod train;
pub mod weaklabel;

pub use corpus::{Document, Post, RiskLabel};
pub use error::{Error, Result};
