use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use ideation_core::corpus::{load_posts, save_posts, split_train_test, Format, NUM_CLASSES};
use ideation_core::embed::{build_vocab, encode, load_embeddings, random_embeddings, Vocabulary};
use ideation_core::nn::model::{argmax, predict_proba};
use ideation_core::nn::{ModelParams, Tensor};
use ideation_core::textprep::{Lemmatizer, Preprocessor, StopWordList};
use ideation_core::train::ablation::{ablation_suite, render, write_csv};
use ideation_core::train::fit::fit_with_heldout;
use ideation_core::train::persist::TrainedModel;
use ideation_core::train::{evaluate, load_model, save_model, EncodedSet, TrainConfig};
use ideation_core::weaklabel::{
    annotate, count_ngrams, propagate_user_labels, reference_fractions, top_counts,
    DEFAULT_SEVERITY,
};
use ideation_core::{Document, Error, Post, Result, RiskLabel};
use serde::Serialize;

use crate::config::RunConfig;
use crate::synth::{self, csv_err, csv_writer, SynthSpec};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn prepare_out(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    cfg.write(&cfg.out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

fn preprocessor(cfg: &RunConfig) -> Result<Preprocessor> {
    let stopwords = match &cfg.stopwords {
        Some(p) => StopWordList::from_file(p)?,
        None => StopWordList::default(),
    };
    let lemmatizer = match &cfg.lemmas {
        Some(p) => Lemmatizer::from_file(p)?,
        None => Lemmatizer::default(),
    };
    Ok(Preprocessor::new(stopwords, lemmatizer))
}

/// Loads posts, reporting malformed records on stderr.
fn posts(cfg: &RunConfig) -> Result<Vec<Post>> {
    let path = cfg.dataset()?;
    let loaded = load_posts(path, Format::from_path(path))?;
    for e in &loaded.errors {
        eprintln!("{}: line {}: {}", path.display(), e.line, e.message);
    }
    Ok(loaded.posts)
}

fn labeled_documents(cfg: &RunConfig, pre: &Preprocessor) -> Result<Vec<Document>> {
    let (docs, report) = pre.documents(&posts(cfg)?);
    if let Some(d) = docs.iter().find(|d| d.label.is_none()) {
        return Err(Error::Unlabeled(d.post_id.clone()));
    }
    eprintln!(
        "{} posts, {} empty and {} duplicate dropped, {} documents",
        report.posts, report.dropped_empty, report.dropped_duplicate, report.documents
    );
    Ok(docs)
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    prepare_out(cfg)?;
    let spec = SynthSpec {
        posts: cfg.posts,
        posts_per_user: cfg.posts_per_user,
        noise: cfg.noise,
        embed_dim: cfg.train.model.embed_dim,
        seed: cfg.train.seed,
    };
    let corpus = synth::generate(&spec);
    synth::write(&cfg.out, &corpus, &preprocessor(cfg)?, &spec)?;
    println!(
        "wrote {} posts by {} users to {}",
        corpus.posts.len(),
        corpus.users.len(),
        cfg.out.display()
    );
    Ok(())
}

pub fn preprocess(cfg: &RunConfig) -> Result<()> {
    let pre = preprocessor(cfg)?;
    let posts = posts(cfg)?;
    prepare_out(cfg)?;
    let (docs, report) = pre.documents(&posts);
    let path = cfg.out.join("documents.jsonl");
    let mut text = String::new();
    for d in &docs {
        text += &serde_json::to_string(d)?;
        text.push('\n');
    }
    std::fs::write(&path, text).map_err(io_err(&path))?;
    write_json(&cfg.out.join("prep_report.json"), &report)?;
    println!("{} of {} posts kept", report.documents, report.posts);
    Ok(())
}

fn read_user_labels(path: &Path) -> Result<HashMap<String, RiskLabel>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let (user_col, label_col) = (column("user_id")?, column("label")?);
    let mut labels = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let line = i + 2;
        let label: RiskLabel = record[label_col].parse().map_err(|_| Error::Parse {
            line,
            message: format!("label `{}` is not a code in 0..=3", &record[label_col]),
        })?;
        labels.insert(record[user_col].to_string(), label);
    }
    Ok(labels)
}

#[derive(Serialize)]
struct AnnotationReport {
    thresholds: ideation_core::weaklabel::Thresholds,
    target_fractions: [f64; NUM_CLASSES],
    achieved_counts: [usize; NUM_CLASSES],
    weighted_terms: usize,
    documents: usize,
}

/// Replaces user-level labels with post-level weak labels.
pub fn annotate_cmd(cfg: &RunConfig) -> Result<()> {
    let pre = preprocessor(cfg)?;
    let user_labels = read_user_labels(cfg.users()?)?;
    let posts = posts(cfg)?;
    let (mut docs, _) = pre.documents(&posts);
    propagate_user_labels(&mut docs, &user_labels)?;
    let ann = annotate(&docs, cfg.top_k, DEFAULT_SEVERITY, reference_fractions())?;
    prepare_out(cfg)?;

    let by_id: HashMap<&str, &Post> = posts.iter().map(|p| (p.post_id.as_str(), p)).collect();
    let labeled: Vec<Post> = docs
        .iter()
        .zip(&ann.labels)
        .map(|(d, &label)| Post {
            label: Some(label),
            ..by_id[d.post_id.as_str()].clone()
        })
        .collect();
    save_posts(&cfg.out.join("annotated.csv"), &labeled, Format::Csv)?;

    let scores_path = cfg.out.join("scores.csv");
    let mut w = csv_writer(&scores_path)?;
    w.write_record(["post_id", "user_label", "score", "label"])
        .map_err(csv_err)?;
    for ((d, score), label) in docs.iter().zip(&ann.scores).zip(&ann.labels) {
        let user_label = d.label.map(|l| l.code().to_string()).unwrap_or_default();
        w.write_record([
            &d.post_id,
            &user_label,
            &score.to_string(),
            &label.code().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&scores_path))?;

    let mut achieved_counts = [0; NUM_CLASSES];
    for l in &ann.labels {
        achieved_counts[l.index()] += 1;
    }
    write_json(
        &cfg.out.join("thresholds.json"),
        &AnnotationReport {
            thresholds: ann.thresholds,
            target_fractions: reference_fractions(),
            achieved_counts,
            weighted_terms: ann.terms.len(),
            documents: docs.len(),
        },
    )?;
    println!(
        "thresholds {:.6} {:.6} {:.6}; class counts {:?}",
        ann.thresholds.t1, ann.thresholds.t2, ann.thresholds.t3, achieved_counts
    );
    Ok(())
}

/// `class,n,ngram,count,rank` for the most frequent n-grams of each class.
pub fn report_ngrams(cfg: &RunConfig) -> Result<()> {
    let docs = labeled_documents(cfg, &preprocessor(cfg)?)?;
    prepare_out(cfg)?;
    let path = cfg.out.join("ngrams.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["class", "n", "ngram", "count", "rank"])
        .map_err(csv_err)?;
    for n in 1..=3 {
        let table = count_ngrams(&docs, n)?;
        for (class, counts) in table.per_class.iter().enumerate() {
            for (rank, (gram, count)) in top_counts(counts, cfg.top_k).into_iter().enumerate() {
                w.write_record([
                    class.to_string(),
                    n.to_string(),
                    gram,
                    count.to_string(),
                    (rank + 1).to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(io_err(&path))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Train/test split with encodings and the initial embedding matrix.
struct Prepared {
    train_docs: Vec<Document>,
    test_docs: Vec<Document>,
    vocab: Vocabulary,
    embedding: Tensor,
    train_cfg: TrainConfig,
    train: EncodedSet,
    test: EncodedSet,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let docs = labeled_documents(cfg, &preprocessor(cfg)?)?;
    let mut train_cfg = cfg.train.clone();
    let (train_docs, test_docs) =
        split_train_test(&docs, train_cfg.train_fraction, train_cfg.seed)?;
    let (vocab, embedding) = match &cfg.embeddings {
        Some(path) => load_embeddings(path, train_cfg.seed)?,
        None => {
            let vocab = build_vocab(&train_docs, cfg.min_count)?;
            let m = random_embeddings(vocab.len(), train_cfg.model.embed_dim, train_cfg.seed);
            (vocab, m)
        }
    };
    let model = &mut train_cfg.model;
    model.embed_dim = embedding.dim(1);
    let longest = train_docs.iter().map(|d| d.tokens.len()).max().unwrap_or(1);
    model.max_len = longest.min(model.max_len).max(model.pool);
    model.validate()?;
    let train = EncodedSet::from_documents(&train_docs, &vocab, model.max_len)?;
    let test = EncodedSet::from_documents(&test_docs, &vocab, model.max_len)?;
    Ok(Prepared {
        train_docs,
        test_docs,
        vocab,
        embedding,
        train_cfg,
        train,
        test,
    })
}

fn select_posts(all: &[Post], docs: &[Document]) -> Vec<Post> {
    let by_id: HashMap<&str, &Post> = all.iter().map(|p| (p.post_id.as_str(), p)).collect();
    docs.iter()
        .map(|d| by_id[d.post_id.as_str()].clone())
        .collect()
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let p = prepare(cfg)?;
    let params = ModelParams::init(&p.train_cfg.model, p.embedding)?;
    eprintln!(
        "training {} on {} documents ({} parameters, max_len {})",
        p.train_cfg.model.architecture,
        p.train.len(),
        params.num_parameters(),
        p.train_cfg.model.max_len
    );
    let (params, history) = fit_with_heldout(&p.train_cfg, &p.train, params, Some(&p.test))?;
    prepare_out(cfg)?;
    let model = TrainedModel {
        config: p.train_cfg.model.clone(),
        vocab: p.vocab,
        params,
    };
    save_model(&model, &cfg.out.join("model.bin"))?;
    history.write_csv(&cfg.out.join("history.csv"))?;
    model.vocab.write_csv(&cfg.out.join("vocab.csv"))?;
    let all = posts(cfg)?;
    save_posts(
        &cfg.out.join("train.csv"),
        &select_posts(&all, &p.train_docs),
        Format::Csv,
    )?;
    save_posts(
        &cfg.out.join("test.csv"),
        &select_posts(&all, &p.test_docs),
        Format::Csv,
    )?;
    for e in &history.epochs {
        println!(
            "epoch {:>3}  loss {:.6}  accuracy {:.4}  test accuracy {:.4}",
            e.epoch,
            e.loss,
            e.accuracy,
            e.heldout_accuracy.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn encode_posts(model: &TrainedModel, pre: &Preprocessor, posts: &[Post]) -> Vec<Vec<usize>> {
    posts
        .iter()
        .map(|p| {
            let tokens = pre.document(p).map(|d| d.tokens).unwrap_or_default();
            encode(&tokens, &model.vocab, model.config.max_len)
        })
        .collect()
}

pub fn evaluate_cmd(cfg: &RunConfig) -> Result<()> {
    let model = load_model(cfg.model_path()?)?;
    let docs = labeled_documents(cfg, &preprocessor(cfg)?)?;
    let data = EncodedSet::from_documents(&docs, &model.vocab, model.config.max_len)?;
    let metrics = evaluate(&model.params, &model.config, &data)?;
    prepare_out(cfg)?;
    write_json(&cfg.out.join("metrics.json"), &metrics)?;
    println!(
        "accuracy {:.4}  macro precision {:.4}  macro recall {:.4}  macro F1 {:.4}",
        metrics.accuracy, metrics.macro_precision, metrics.macro_recall, metrics.macro_f1
    );
    Ok(())
}

/// Per-post labels plus one row per user carrying the highest risk among
/// that user's posts.
pub fn predict(cfg: &RunConfig) -> Result<()> {
    let model = load_model(cfg.model_path()?)?;
    let pre = preprocessor(cfg)?;
    let posts = posts(cfg)?;
    let sequences = encode_posts(&model, &pre, &posts);
    let probs = predict_proba(&model.params, &model.config, &sequences)?;
    prepare_out(cfg)?;

    let path = cfg.out.join("predictions.csv");
    let mut w = csv_writer(&path)?;
    let mut header = vec![
        "post_id".to_string(),
        "user_id".into(),
        "label".into(),
        "risk".into(),
    ];
    header.extend(RiskLabel::ALL.iter().map(|l| format!("p_{}", l.code())));
    w.write_record(&header).map_err(csv_err)?;
    let mut users: BTreeMap<&str, (usize, RiskLabel)> = BTreeMap::new();
    for (b, post) in posts.iter().enumerate() {
        let row = probs.row(b);
        let label = RiskLabel::ALL[argmax(row)];
        let mut record = vec![
            post.post_id.clone(),
            post.user_id.clone(),
            label.code().to_string(),
            label.name().to_string(),
        ];
        record.extend(row.iter().map(|p| format!("{p:.6}")));
        w.write_record(&record).map_err(csv_err)?;
        let entry = users.entry(&post.user_id).or_insert((0, label));
        entry.0 += 1;
        entry.1 = entry.1.max(label);
    }
    w.flush().map_err(io_err(&path))?;

    let path = cfg.out.join("users.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["user_id", "posts", "label", "risk"])
        .map_err(csv_err)?;
    for (user, (count, label)) in &users {
        w.write_record([
            *user,
            &count.to_string(),
            &label.code().to_string(),
            label.name(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&path))?;
    println!("{} posts, {} users", posts.len(), users.len());
    Ok(())
}

pub fn ablate(cfg: &RunConfig) -> Result<()> {
    let p = prepare(cfg)?;
    let rows = ablation_suite(&p.train_cfg, &p.train, &p.test, &p.embedding)?;
    prepare_out(cfg)?;
    write_csv(&cfg.out.join("ablation.csv"), &rows)?;
    print!("{}", render(&rows));
    Ok(())
}
