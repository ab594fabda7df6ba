//! Seeded four-class corpus with planted keyword themes.

use std::collections::BTreeSet;
use std::path::Path;

use ideation_core::corpus::{save_posts, Format, NUM_CLASSES};
use ideation_core::embed::{write_embeddings, Vocabulary};
use ideation_core::nn::Tensor;
use ideation_core::rng::{self, Rng};
use ideation_core::textprep::Preprocessor;
use ideation_core::{Error, Post, Result, RiskLabel};
use rand_distr::{Distribution, Normal};

/// Phrases planted for each class, indexed by label code.
pub const THEMES: [&[&str]; NUM_CLASSES] = [
    &[
        "good game",
        "appreciate",
        "fun",
        "friend",
        "great weekend",
        "love music",
        "happy",
        "thanks",
        "awesome match",
        "nice movie",
    ],
    &[
        "stressed",
        "tired",
        "sad",
        "exam",
        "work pressure",
        "bad day",
        "annoyed",
        "worry",
        "deadline",
        "headache",
    ],
    &[
        "feel empty",
        "feel lonely",
        "hopeless",
        "nobody care",
        "worthless",
        "numb",
        "cry",
        "alone",
        "isolated",
        "pointless",
    ],
    &[
        "want end",
        "die",
        "disappear",
        "kill myself",
        "suicide",
        "goodbye",
        "pill",
        "overdose",
        "final note",
        "reason live",
    ],
];

/// Theme-free words shared by every class.
pub const FILLER: &[&str] = &[
    "today", "people", "thing", "time", "week", "school", "home", "family", "reddit", "think",
    "know", "really", "year", "phone", "car", "city", "weather", "food", "coffee", "morning",
    "street", "book", "idea", "window", "dog", "cat", "bus", "question", "story", "place",
];

const FUNCTION_WORDS: &[&str] = &["i", "the", "and", "to", "it", "is", "so", "just", "my", "a"];

const SUBREDDITS: [&[&str]; NUM_CLASSES] = [
    &["CasualConversation", "gaming"],
    &["Anxiety", "offmychest"],
    &["depression", "lonely"],
    &["SuicideWatch", "depression"],
];

const BASE_TIMESTAMP: i64 = 1_420_070_400;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub posts: usize,
    pub posts_per_user: usize,
    pub noise: f64,
    pub embed_dim: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub posts: Vec<Post>,
    pub users: Vec<(String, RiskLabel)>,
}

fn pick<'a>(items: &[&'a str], r: &mut Rng) -> &'a str {
    items[rng::below(r, items.len())]
}

/// A phrase for `class`, swapped for a neighboring class with probability `noise`.
fn phrase(class: usize, noise: f64, r: &mut Rng) -> &'static str {
    let mut c = class;
    if rng::unit(r) < noise {
        c = match class {
            0 => 1,
            3 => 2,
            _ if rng::unit(r) < 0.5 => class - 1,
            _ => class + 1,
        };
    }
    pick(THEMES[c], r)
}

/// Users are assigned classes round-robin; each post gets two phrases of its
/// author's class plus up to two possibly-noisy ones, among filler words.
pub fn generate(spec: &SynthSpec) -> Corpus {
    let mut r = rng::seeded(rng::mix(spec.seed, &[0x5a17]));
    let n_users = spec.posts.div_ceil(spec.posts_per_user);
    let users: Vec<(String, RiskLabel)> = (0..n_users)
        .map(|u| (format!("u{u:05}"), RiskLabel::ALL[u % NUM_CLASSES]))
        .collect();
    let mut posts = Vec::with_capacity(spec.posts);
    for i in 0..spec.posts {
        let (user, label) = &users[i / spec.posts_per_user];
        let class = label.index();
        let mut words: Vec<&str> = (0..6 + rng::below(&mut r, 12))
            .map(|_| {
                if rng::unit(&mut r) < 0.3 {
                    pick(FUNCTION_WORDS, &mut r)
                } else {
                    pick(FILLER, &mut r)
                }
            })
            .collect();
        let mut planted = vec![pick(THEMES[class], &mut r), pick(THEMES[class], &mut r)];
        for _ in 0..rng::below(&mut r, 3) {
            planted.push(phrase(class, spec.noise, &mut r));
        }
        for p in planted {
            let at = rng::below(&mut r, words.len() + 1);
            words.insert(at, p);
        }
        let title_len = 1 + rng::below(&mut r, 3);
        let title = words[..title_len].join(" ");
        let body = words[title_len..].join(" ");
        posts.push(Post {
            post_id: format!("p{i:06}"),
            user_id: user.clone(),
            timestamp: BASE_TIMESTAMP + (i as i64) * 3600 + rng::below(&mut r, 3600) as i64,
            subreddit: pick(SUBREDDITS[class], &mut r).to_string(),
            title,
            body,
            label: Some(*label),
        });
    }
    Corpus { posts, users }
}

/// Vectors for every token the lexicon yields after preprocessing. Theme
/// tokens sit near a per-class centroid; filler tokens are pure noise.
pub fn embeddings(pre: &Preprocessor, dim: usize, seed: u64) -> Result<(Vocabulary, Tensor)> {
    let tokens_of =
        |words: &[&str]| -> BTreeSet<String> { words.iter().flat_map(|w| pre.tokens(w)).collect() };
    let mut r = rng::seeded(rng::mix(seed, &[0xe3b]));
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut draw = |scale: f64| -> Vec<f64> {
        (0..dim)
            .map(|_| round6(scale * normal.sample(&mut r)))
            .collect()
    };
    let mut entries: Vec<(String, Vec<f64>)> = Vec::new();
    let mut seen = BTreeSet::new();
    for theme in THEMES {
        let centroid = draw(0.5);
        for token in tokens_of(theme) {
            if seen.insert(token.clone()) {
                let noise = draw(0.2);
                let v = centroid
                    .iter()
                    .zip(&noise)
                    .map(|(c, n)| round6(c + n))
                    .collect();
                entries.push((token, v));
            }
        }
    }
    for token in tokens_of(FILLER) {
        if seen.insert(token.clone()) {
            entries.push((token, draw(0.3)));
        }
    }
    let vocab = Vocabulary::from_tokens(entries.iter().map(|(t, _)| t.clone()))?;
    let mut data = vec![0.0; 2 * dim];
    for (_, v) in &entries {
        data.extend_from_slice(v);
    }
    Ok((vocab, Tensor::from_vec(&[entries.len() + 2, dim], data)?))
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Writes `posts.csv`, `users.csv`, and `embeddings.txt` into `dir`.
pub fn write(dir: &Path, corpus: &Corpus, pre: &Preprocessor, spec: &SynthSpec) -> Result<()> {
    save_posts(&dir.join("posts.csv"), &corpus.posts, Format::Csv)?;
    let users_path = dir.join("users.csv");
    let mut w = csv_writer(&users_path)?;
    w.write_record(["user_id", "label"]).map_err(csv_err)?;
    for (user, label) in &corpus.users {
        w.write_record([user.as_str(), &label.code().to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: users_path.clone(),
        source: e,
    })?;
    let (vocab, matrix) = embeddings(pre, spec.embed_dim, spec.seed)?;
    write_embeddings(&dir.join("embeddings.txt"), &vocab, &matrix)
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(csv_err)
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e)
}
