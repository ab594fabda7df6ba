//! Post records, label codes, and corpus-level operations: loading, merging
//! title and body, deduplication, and the seeded train/test split.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, RecordError, Result};
use crate::rng;

pub const NUM_CLASSES: usize = 4;

/// Four-level risk class. The integer codes are part of every file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum RiskLabel {
    NoRisk = 0,
    LowRisk = 1,
    ModerateRisk = 2,
    SevereRisk = 3,
}

impl RiskLabel {
    pub const ALL: [RiskLabel; NUM_CLASSES] = [
        RiskLabel::NoRisk,
        RiskLabel::LowRisk,
        RiskLabel::ModerateRisk,
        RiskLabel::SevereRisk,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            RiskLabel::NoRisk => "no_risk",
            RiskLabel::LowRisk => "low_risk",
            RiskLabel::ModerateRisk => "moderate_risk",
            RiskLabel::SevereRisk => "severe_risk",
        }
    }
}

impl From<RiskLabel> for u8 {
    fn from(label: RiskLabel) -> u8 {
        label.code()
    }
}

impl TryFrom<u8> for RiskLabel {
    type Error = String;

    fn try_from(code: u8) -> std::result::Result<Self, String> {
        RiskLabel::from_code(code).ok_or_else(|| format!("label code {code} outside 0..=3"))
    }
}

impl FromStr for RiskLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let code: u8 = s
            .trim()
            .parse()
            .map_err(|_| format!("label `{s}` is not an integer code 0..=3"))?;
        RiskLabel::try_from(code)
    }
}

impl fmt::Display for RiskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A raw social-media post. `label` carries the optional seventh column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub post_id: String,
    pub user_id: String,
    pub timestamp: i64,
    pub subreddit: String,
    pub title: String,
    pub body: String,
    pub label: Option<RiskLabel>,
}

/// A cleaned post ready for the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub post_id: String,
    pub user_id: String,
    /// Cleaned text with title and body merged.
    pub text: String,
    /// Tokens after stop-word removal and lemmatization.
    pub tokens: Vec<String>,
    pub label: Option<RiskLabel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Format::Jsonl,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(format!("unknown format `{other}` (expected csv or jsonl)")),
        }
    }
}

pub const COLUMNS: [&str; 6] = [
    "post_id",
    "user_id",
    "timestamp",
    "subreddit",
    "post_title",
    "post_body",
];
pub const LABEL_COLUMN: &str = "label";

/// Posts parsed from a file plus the records that were rejected.
#[derive(Debug, Default)]
pub struct Loaded {
    pub posts: Vec<Post>,
    pub errors: Vec<RecordError>,
}

pub fn load_posts(path: &Path, format: Format) -> Result<Loaded> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let (rows, mut errors) = match format {
        Format::Csv => read_csv(path, file)?,
        Format::Jsonl => read_jsonl(path, file)?,
    };
    let mut first_seen = HashMap::new();
    let mut posts = Vec::with_capacity(rows.len());
    for (line, post) in rows {
        if let Some(first) = first_seen.get(&post.post_id) {
            errors.push(RecordError {
                line,
                message: format!(
                    "duplicate post_id `{}` (first on line {first})",
                    post.post_id
                ),
            });
        } else {
            first_seen.insert(post.post_id.clone(), line);
            posts.push(post);
        }
    }
    errors.sort_by_key(|e| e.line);
    Ok(Loaded { posts, errors })
}

type Rows = (Vec<(usize, Post)>, Vec<RecordError>);

fn build_post(
    post_id: String,
    user_id: String,
    timestamp: &str,
    subreddit: String,
    title: String,
    body: String,
    label: Option<&str>,
) -> std::result::Result<Post, String> {
    if post_id.is_empty() {
        return Err("empty post_id".into());
    }
    let timestamp: i64 = timestamp
        .trim()
        .parse()
        .map_err(|_| format!("timestamp `{timestamp}` is not an integer"))?;
    if title.is_empty() && body.is_empty() {
        return Err("post_title and post_body are both empty".into());
    }
    let label = match label {
        Some(s) if !s.trim().is_empty() => Some(s.parse::<RiskLabel>()?),
        _ => None,
    };
    Ok(Post {
        post_id,
        user_id,
        timestamp,
        subreddit,
        title,
        body,
        label,
    })
}

fn read_csv(path: &Path, file: File) -> Result<Rows> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(BufReader::new(file));
    let headers = reader.headers()?.clone();
    let mut positions = [0usize; 6];
    for (slot, column) in positions.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: column.to_string(),
            })?;
    }
    let label_pos = headers.iter().position(|h| h == LABEL_COLUMN);

    let (mut rows, mut errors) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                errors.push(RecordError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| record.get(positions[i]).map(str::to_string);
        let fields: Option<Vec<String>> = (0..6).map(field).collect();
        let Some(f) = fields else {
            errors.push(RecordError {
                line,
                message: format!(
                    "expected at least {} fields, found {}",
                    headers.len(),
                    record.len()
                ),
            });
            continue;
        };
        let [post_id, user_id, timestamp, subreddit, title, body]: [String; 6] =
            f.try_into().expect("six fields");
        let label = label_pos.and_then(|p| record.get(p));
        match build_post(post_id, user_id, &timestamp, subreddit, title, body, label) {
            Ok(post) => rows.push((line, post)),
            Err(message) => errors.push(RecordError { line, message }),
        }
    }
    Ok((rows, errors))
}

fn read_jsonl(path: &Path, file: File) -> Result<Rows> {
    let (mut rows, mut errors) = (Vec::new(), Vec::new());
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_json_record(&line) {
            Ok(post) => rows.push((line_no, post)),
            Err(message) => errors.push(RecordError {
                line: line_no,
                message,
            }),
        }
    }
    Ok((rows, errors))
}

fn parse_json_record(line: &str) -> std::result::Result<Post, String> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let object = value.as_object().ok_or("record is not a JSON object")?;
    let text = |key: &str| -> std::result::Result<String, String> {
        match object.get(key) {
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(format!("key `{key}` is not a string")),
            None => Err(format!("missing key `{key}`")),
        }
    };
    let timestamp = match object.get("timestamp") {
        Some(serde_json::Value::Number(n)) => n.to_string(),
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(_) => return Err("key `timestamp` is not an integer".into()),
        None => return Err("missing key `timestamp`".into()),
    };
    let label = match object.get(LABEL_COLUMN) {
        None | Some(serde_json::Value::Null) => None,
        Some(serde_json::Value::Number(n)) => Some(n.to_string()),
        Some(_) => return Err("key `label` is not an integer code".into()),
    };
    build_post(
        text("post_id")?,
        text("user_id")?,
        &timestamp,
        text("subreddit")?,
        text("post_title")?,
        text("post_body")?,
        label.as_deref(),
    )
}

/// Writes posts in the same schema `load_posts` reads. The label column is
/// emitted when any post carries a label.
pub fn save_posts(path: &Path, posts: &[Post], format: Format) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let with_label = posts.iter().any(|p| p.label.is_some());
    let label_text = |p: &Post| p.label.map(|l| l.code().to_string()).unwrap_or_default();
    match format {
        Format::Csv => {
            let mut writer = csv::Writer::from_writer(BufWriter::new(file));
            let mut header: Vec<&str> = COLUMNS.to_vec();
            if with_label {
                header.push(LABEL_COLUMN);
            }
            writer.write_record(&header)?;
            for p in posts {
                let ts = p.timestamp.to_string();
                let mut row = vec![
                    p.post_id.as_str(),
                    p.user_id.as_str(),
                    ts.as_str(),
                    p.subreddit.as_str(),
                    p.title.as_str(),
                    p.body.as_str(),
                ];
                let label = label_text(p);
                if with_label {
                    row.push(label.as_str());
                }
                writer.write_record(&row)?;
            }
            writer.flush().map_err(|e| Error::io(path, e))?;
        }
        Format::Jsonl => {
            let mut writer = BufWriter::new(file);
            for p in posts {
                let mut object = serde_json::Map::new();
                object.insert("post_id".into(), p.post_id.clone().into());
                object.insert("user_id".into(), p.user_id.clone().into());
                object.insert("timestamp".into(), p.timestamp.into());
                object.insert("subreddit".into(), p.subreddit.clone().into());
                object.insert("post_title".into(), p.title.clone().into());
                object.insert("post_body".into(), p.body.clone().into());
                if let Some(label) = p.label {
                    object.insert(LABEL_COLUMN.into(), label.code().into());
                }
                serde_json::to_writer(&mut writer, &object)?;
                writer.write_all(b"\n").map_err(|e| Error::io(path, e))?;
            }
            writer.flush().map_err(|e| Error::io(path, e))?;
        }
    }
    Ok(())
}

/// Title and body joined by one space, or whichever side is non-empty.
pub fn merge_title_body(post: &Post) -> Result<String> {
    match (post.title.is_empty(), post.body.is_empty()) {
        (true, true) => Err(Error::EmptyPost),
        (true, false) => Ok(post.body.clone()),
        (false, true) => Ok(post.title.clone()),
        (false, false) => Ok(format!("{} {}", post.title, post.body)),
    }
}

/// Keeps the first document for each distinct cleaned text.
pub fn dedupe(docs: Vec<Document>) -> Vec<Document> {
    let mut seen = HashSet::new();
    docs.into_iter()
        .filter(|d| seen.insert(d.text.clone()))
        .collect()
}

fn train_count(n: usize, train_fraction: f64) -> usize {
    // The epsilon absorbs products such as 0.29 * 100 = 28.999999999999996.
    ((train_fraction * n as f64) + 1e-9).floor() as usize
}

/// Seeded shuffle followed by a cut at `floor(train_fraction * n)`.
pub fn split_train_test(
    docs: &[Document],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<Document>, Vec<Document>)> {
    if docs.is_empty() {
        return Err(Error::Empty("cannot split an empty corpus".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    if let Some(d) = docs.iter().find(|d| d.label.is_none()) {
        return Err(Error::Unlabeled(d.post_id.clone()));
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    rng::shuffle(&mut order, &mut rng::seeded(seed));
    let cut = train_count(docs.len(), train_fraction);
    let train = order[..cut].iter().map(|&i| docs[i].clone()).collect();
    let test = order[cut..].iter().map(|&i| docs[i].clone()).collect();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn post(title: &str, body: &str) -> Post {
        Post {
            post_id: "p".into(),
            user_id: "u".into(),
            timestamp: 0,
            subreddit: "s".into(),
            title: title.into(),
            body: body.into(),
            label: None,
        }
    }

    fn doc(id: usize, text: &str) -> Document {
        Document {
            post_id: format!("p{id}"),
            user_id: "u".into(),
            text: text.into(),
            tokens: text.split(' ').map(String::from).collect(),
            label: Some(RiskLabel::ALL[id % 4]),
        }
    }

    #[test]
    fn merge_rules() {
        assert_eq!(
            merge_title_body(&post("help", "i am lost")).unwrap(),
            "help i am lost"
        );
        assert_eq!(merge_title_body(&post("", "x")).unwrap(), "x");
        assert_eq!(merge_title_body(&post("a", "")).unwrap(), "a");
        assert!(matches!(
            merge_title_body(&post("", "")),
            Err(Error::EmptyPost)
        ));
    }

    #[test]
    fn dedupe_keeps_first() {
        let out = dedupe(vec![doc(0, "a"), doc(1, "b"), doc(2, "a")]);
        let texts: Vec<_> = out.iter().map(|d| d.text.as_str()).collect();
        assert_eq!(texts, ["a", "b"]);
        assert_eq!(out[0].post_id, "p0");
        assert!(dedupe(vec![]).is_empty());
    }

    #[test]
    fn split_counts_follow_floor_rule() {
        assert_eq!(train_count(69_600, 0.8), 55_680);
        assert_eq!(69_600 - train_count(69_600, 0.8), 13_920);
        let docs: Vec<_> = (0..5).map(|i| doc(i, &format!("t{i}"))).collect();
        let (train, test) = split_train_test(&docs, 0.8, 1).unwrap();
        assert_eq!((train.len(), test.len()), (4, 1));
    }

    #[test]
    fn split_is_seeded() {
        let docs: Vec<_> = (0..10).map(|i| doc(i, &format!("t{i}"))).collect();
        assert_eq!(
            split_train_test(&docs, 0.8, 42).unwrap(),
            split_train_test(&docs, 0.8, 42).unwrap()
        );
        assert_ne!(
            split_train_test(&docs, 0.8, 42).unwrap().0,
            split_train_test(&docs, 0.8, 43).unwrap().0
        );
    }

    #[test]
    fn split_rejects_unlabeled() {
        let mut docs: Vec<_> = (0..4).map(|i| doc(i, &format!("t{i}"))).collect();
        docs[2].label = None;
        assert!(matches!(split_train_test(&docs, 0.8, 0), Err(Error::Unlabeled(id)) if id == "p2"));
    }

    #[test]
    fn label_codes_are_stable() {
        for (code, label) in RiskLabel::ALL.iter().enumerate() {
            assert_eq!(label.code() as usize, code);
            assert_eq!(serde_json::to_string(label).unwrap(), code.to_string());
        }
        assert!("4".parse::<RiskLabel>().is_err());
    }

    proptest! {
        #[test]
        fn split_partitions(n in 1usize..60, frac in 0.05f64..0.95, seed: u64) {
            let docs: Vec<_> = (0..n).map(|i| doc(i, &format!("t{i}"))).collect();
            let (train, test) = split_train_test(&docs, frac, seed).unwrap();
            prop_assert_eq!(train.len() + test.len(), n);
            let mut ids: Vec<_> = train.iter().chain(&test).map(|d| d.post_id.clone()).collect();
            ids.sort();
            let mut expected: Vec<_> = docs.iter().map(|d| d.post_id.clone()).collect();
            expected.sort();
            prop_assert_eq!(ids, expected);
        }

        #[test]
        fn dedupe_is_idempotent(texts in proptest::collection::vec("[ab]{0,2}", 0..20)) {
            let docs: Vec<_> = texts.iter().enumerate().map(|(i, t)| doc(i, t)).collect();
            let once = dedupe(docs);
            prop_assert_eq!(dedupe(once.clone()), once);
        }
    }
}
