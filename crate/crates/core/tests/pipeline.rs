use std::collections::HashMap;

use ideation_core::corpus::{split_train_test, NUM_CLASSES};
use ideation_core::embed::{build_vocab, random_embeddings};
use ideation_core::nn::{ModelConfig, ModelParams};
use ideation_core::textprep::Preprocessor;
use ideation_core::train::fit::predict;
use ideation_core::train::persist::{from_bytes, to_bytes, TrainedModel};
use ideation_core::train::{evaluate, fit, EncodedSet, TrainConfig};
use ideation_core::weaklabel::{
    annotate, propagate_user_labels, reference_fractions, DEFAULT_SEVERITY,
};
use ideation_core::{Post, RiskLabel};

const THEMES: [&str; NUM_CLASSES] = [
    "good game with a friend, appreciate it",
    "stressed and tired after the exam",
    "i feel empty and lonely, hopeless",
    "i want to end it all and disappear",
];

fn posts() -> (Vec<Post>, HashMap<String, RiskLabel>) {
    let mut posts = Vec::new();
    let mut users = HashMap::new();
    for u in 0..24 {
        let label = RiskLabel::ALL[u % NUM_CLASSES];
        users.insert(format!("u{u}"), label);
        for k in 0..3 {
            posts.push(Post {
                post_id: format!("p{u}-{k}"),
                user_id: format!("u{u}"),
                timestamp: 0,
                subreddit: "s".into(),
                title: format!("post {k} day {u}"),
                body: THEMES[label.index()].into(),
                label: None,
            });
        }
    }
    (posts, users)
}

#[test]
fn weak_labels_then_training_then_reload() {
    let (posts, users) = posts();
    let (mut docs, report) = Preprocessor::default().documents(&posts);
    assert_eq!(report.documents, posts.len());
    propagate_user_labels(&mut docs, &users).unwrap();

    let ann = annotate(&docs, 300, DEFAULT_SEVERITY, reference_fractions()).unwrap();
    assert_eq!(ann.labels.len(), docs.len());
    let t = ann.thresholds;
    assert!(t.t1 < t.t2 && t.t2 < t.t3);
    // Severe-themed posts outscore carefree ones.
    let mean = |class: RiskLabel| {
        let s: Vec<f64> = docs
            .iter()
            .zip(&ann.scores)
            .filter(|(d, _)| d.label == Some(class))
            .map(|(_, &s)| s)
            .collect();
        s.iter().sum::<f64>() / s.len() as f64
    };
    assert!(mean(RiskLabel::SevereRisk) > mean(RiskLabel::NoRisk));

    let (train, test) = split_train_test(&docs, 0.75, 3).unwrap();
    assert_eq!((train.len(), test.len()), (54, 18));
    let vocab = build_vocab(&train, 1).unwrap();
    let model = ModelConfig {
        embed_dim: 6,
        lstm_units: 5,
        kernel: 3,
        max_len: 12,
        seed: 3,
        ..ModelConfig::default()
    };
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 8,
        seed: 3,
        model: model.clone(),
        ..TrainConfig::default()
    };
    let train_set = EncodedSet::from_documents(&train, &vocab, model.max_len).unwrap();
    let test_set = EncodedSet::from_documents(&test, &vocab, model.max_len).unwrap();
    let params = ModelParams::init(&model, random_embeddings(vocab.len(), 6, 3)).unwrap();
    let (params, history) = fit(&cfg, &train_set, params).unwrap();
    assert_eq!(history.epochs.len(), 2);
    let metrics = evaluate(&params, &model, &test_set).unwrap();
    let row_sums: u64 = metrics.confusion.iter().flatten().sum();
    assert_eq!(row_sums, 18);

    let trained = TrainedModel {
        config: model.clone(),
        vocab,
        params,
    };
    let reloaded = from_bytes(&to_bytes(&trained).unwrap()).unwrap();
    assert_eq!(reloaded.vocab, trained.vocab);
    // Stored weights are single precision, so predictions are compared
    // rather than raw parameters.
    assert_eq!(
        predict(&reloaded.params, &model, &test_set.sequences).unwrap(),
        predict(&trained.params, &model, &test_set.sequences).unwrap()
    );
}
