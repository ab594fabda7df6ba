use std::path::{Path, PathBuf};

use clap::Args;
use ideation_core::nn::Architecture;
use ideation_core::train::TrainConfig;
use ideation_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Every effective parameter of a run. Written to each output directory as
/// `run.json`; passing that file back through `--config` reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub dataset: Option<PathBuf>,
    /// `user_id,label` table for weak labeling.
    pub users: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: PathBuf,
    /// Synthetic corpus size.
    pub posts: usize,
    pub posts_per_user: usize,
    /// Chance that a planted phrase comes from a neighboring class.
    pub noise: f64,
    pub top_k: usize,
    /// Minimum frequency for the corpus vocabulary when no embeddings file is given.
    pub min_count: usize,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: String::new(),
            dataset: None,
            users: None,
            embeddings: None,
            stopwords: None,
            lemmas: None,
            model: None,
            out: PathBuf::from("out"),
            posts: 2000,
            posts_per_user: 4,
            noise: 0.15,
            top_k: 300,
            min_count: 1,
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("run.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })
    }

    pub fn dataset(&self) -> Result<&Path> {
        required(&self.dataset, "--dataset")
    }

    pub fn model_path(&self) -> Result<&Path> {
        required(&self.model, "--model")
    }

    pub fn users(&self) -> Result<&Path> {
        required(&self.users, "--users")
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.train;
        if t.epochs == 0 {
            return Err(Error::InvalidArgument("--epochs must be positive".into()));
        }
        if t.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "--batch-size must be positive".into(),
            ));
        }
        if !(t.train_fraction > 0.0 && t.train_fraction < 1.0) {
            return Err(Error::InvalidArgument(
                "--train-fraction must lie in (0, 1)".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::InvalidArgument("--noise must lie in [0, 1]".into()));
        }
        if self.posts_per_user == 0 {
            return Err(Error::InvalidArgument(
                "--posts-per-user must be positive".into(),
            ));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidArgument("--top-k must be positive".into()));
        }
        t.model.validate()
    }
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument(format!("{flag} is required")))
}

/// Flags shared by every subcommand. Each one given overrides the value
/// from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Base configuration (a previous run.json)
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Posts file (.csv or .jsonl)
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    /// User label table with columns user_id,label
    #[arg(long, value_name = "FILE")]
    pub users: Option<PathBuf>,
    /// Word vectors in text format
    #[arg(long, value_name = "FILE")]
    pub embeddings: Option<PathBuf>,
    /// Stop-word list, one word per line
    #[arg(long, value_name = "FILE")]
    pub stopwords: Option<PathBuf>,
    /// Lemma exception table, tab-separated
    #[arg(long, value_name = "FILE")]
    pub lemmas: Option<PathBuf>,
    /// Trained model file
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub posts: Option<usize>,
    #[arg(long)]
    pub posts_per_user: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub min_count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Upper bound on the encoded sequence length
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub lstm_units: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub filters: Option<usize>,
    #[arg(long)]
    pub kernel: Option<usize>,
    #[arg(long)]
    pub pool: Option<usize>,
    /// lstm-attention-cnn, lstm-cnn, lstm, or cnn
    #[arg(long)]
    pub architecture: Option<Architecture>,
}

impl Overrides {
    pub fn resolve(&self, command: &str) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.command = command.to_string();
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = &self.$flag {
                    cfg.$($field).+ = v.clone().into();
                })*
            };
        }
        set!(
            dataset => dataset,
            users => users,
            embeddings => embeddings,
            stopwords => stopwords,
            lemmas => lemmas,
            model => model,
            out => out,
            posts => posts,
            posts_per_user => posts_per_user,
            noise => noise,
            top_k => top_k,
            min_count => min_count,
            seed => train.seed,
            epochs => train.epochs,
            batch_size => train.batch_size,
            train_fraction => train.train_fraction,
            learning_rate => train.adam.lr,
            max_len => train.model.max_len,
            embed_dim => train.model.embed_dim,
            lstm_units => train.model.lstm_units,
            dropout => train.model.dropout_rate,
            filters => train.model.filters,
            kernel => train.model.kernel,
            pool => train.model.pool,
            architecture => train.model.architecture,
        );
        cfg.train.model.seed = cfg.train.seed;
        cfg.validate()?;
        Ok(cfg)
    }
}
