//! Loss, optimizer, training loop, evaluation, baselines, and persistence.

pub mod ablation;
pub mod adam;
pub mod fit;
pub mod loss;
pub mod metrics;
pub mod persist;
pub mod svm;

pub use adam::{AdamHyper, AdamState};
pub use fit::{evaluate, fit, EncodedSet, EpochRecord, History, TrainConfig};
pub use metrics::Metrics;
pub use persist::{load_model, save_model, TrainedModel};
