//! Text cleaning, tokenization, stop-word removal, and a rule-table lemmatizer.
//!
//! Cleaning runs in a fixed order:
//!
//! 1. URLs (`http://`, `https://`, or `www.` followed by non-whitespace) become a space.
//! 2. E-mail addresses (`nonspace+ @ nonspace+ . nonspace+`) become a space.
//! 3. `\r` and `\n` become a space.
//! 4. Each ASCII punctuation character becomes a space.
//! 5. The text is lowercased.
//! 6. Whitespace runs collapse to one space and the ends are trimmed.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::corpus::{merge_title_body, Document, Post};
use crate::error::{Error, Result};

pub const URL_PATTERN: &str = r"(?i)(?:https?://|www\.)\S+";
pub const EMAIL_PATTERN: &str = r"\S+@\S+\.\S+";
pub const PUNCTUATION: &str = r##"!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~"##;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");
const DEFAULT_EXCEPTIONS: &str = include_str!("../data/lemma_exceptions.tsv");

/// Compiled cleaning patterns.
#[derive(Debug, Clone)]
pub struct CleanRules {
    url: Regex,
    email: Regex,
    punctuation: HashSet<char>,
}

impl Default for CleanRules {
    fn default() -> Self {
        static RULES: OnceLock<CleanRules> = OnceLock::new();
        RULES
            .get_or_init(|| CleanRules {
                url: Regex::new(URL_PATTERN).expect("url pattern"),
                email: Regex::new(EMAIL_PATTERN).expect("email pattern"),
                punctuation: PUNCTUATION.chars().collect(),
            })
            .clone()
    }
}

impl CleanRules {
    pub fn is_punctuation(&self, c: char) -> bool {
        self.punctuation.contains(&c)
    }
}

pub fn clean(raw: &str, rules: &CleanRules) -> String {
    let text = rules.url.replace_all(raw, " ");
    let text = rules.email.replace_all(&text, " ");
    let text: String = text
        .chars()
        .map(|c| {
            if c == '\n' || c == '\r' || rules.is_punctuation(c) {
                ' '
            } else {
                c
            }
        })
        .collect();
    let text = text.to_lowercase();
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(' ')
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone)]
pub struct StopWordList {
    words: HashSet<String>,
}

impl Default for StopWordList {
    /// The 179-word English list shipped in `data/stopwords_en.txt`.
    fn default() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }
}

impl StopWordList {
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect();
        StopWordList { words }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn drop_stopwords(tokens: Vec<String>, list: &StopWordList) -> Vec<String> {
    tokens.into_iter().filter(|t| !list.contains(t)).collect()
}

/// Exception dictionary followed by ordered suffix rules.
#[derive(Debug, Clone)]
pub struct Lemmatizer {
    exceptions: HashMap<String, String>,
}

impl Default for Lemmatizer {
    fn default() -> Self {
        Self::parse_exceptions(DEFAULT_EXCEPTIONS).expect("shipped exception table parses")
    }
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn has_vowel(s: &str) -> bool {
    s.bytes().any(|b| is_vowel(b) || b == b'y')
}

/// Drops one letter of a trailing doubled consonant (`runn` -> `run`),
/// except for l, s, and z which commonly double in the base form.
fn undouble(stem: &str) -> &str {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 3
        && b[n - 1] == b[n - 2]
        && !is_vowel(b[n - 1])
        && !matches!(b[n - 1], b'l' | b's' | b'z')
    {
        &stem[..n - 1]
    } else {
        stem
    }
}

impl Lemmatizer {
    /// Parses `surface<TAB>lemma` lines; blank lines and `#` comments are skipped.
    pub fn parse_exceptions(text: &str) -> Result<Self> {
        let mut exceptions = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (surface, lemma) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected `surface<TAB>lemma`".into(),
            })?;
            exceptions.insert(surface.to_string(), lemma.to_string());
        }
        Ok(Lemmatizer { exceptions })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_exceptions(&text)
    }

    pub fn lemma(&self, token: &str) -> String {
        if let Some(lemma) = self.exceptions.get(token) {
            return lemma.clone();
        }
        if !token.is_ascii() {
            return token.to_string();
        }
        let n = token.len();
        if n > 4 && token.ends_with("ies") {
            return format!("{}y", &token[..n - 3]);
        }
        if n > 4
            && ["sses", "shes", "ches", "xes", "zes"]
                .iter()
                .any(|s| token.ends_with(s))
        {
            return token[..n - 2].to_string();
        }
        if n > 3 && token.ends_with('s') && !["ss", "us", "is"].iter().any(|s| token.ends_with(s)) {
            return token[..n - 1].to_string();
        }
        if n > 5 && token.ends_with("ing") {
            let stem = &token[..n - 3];
            if has_vowel(stem) {
                return undouble(stem).to_string();
            }
        }
        if n > 4 && token.ends_with("ed") && !token.ends_with("eed") {
            let stem = &token[..n - 2];
            if has_vowel(stem) {
                return undouble(stem).to_string();
            }
        }
        token.to_string()
    }
}

pub fn lemmatize(tokens: Vec<String>, lemmatizer: &Lemmatizer) -> Vec<String> {
    tokens.into_iter().map(|t| lemmatizer.lemma(&t)).collect()
}

/// The full text pipeline applied to every post.
#[derive(Debug, Clone, Default)]
pub struct Preprocessor {
    pub rules: CleanRules,
    pub stopwords: StopWordList,
    pub lemmatizer: Lemmatizer,
}

/// Counts from turning posts into documents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PrepReport {
    pub posts: usize,
    pub dropped_empty: usize,
    pub dropped_duplicate: usize,
    pub documents: usize,
}

impl Preprocessor {
    pub fn new(stopwords: StopWordList, lemmatizer: Lemmatizer) -> Self {
        Preprocessor {
            rules: CleanRules::default(),
            stopwords,
            lemmatizer,
        }
    }

    pub fn tokens(&self, cleaned: &str) -> Vec<String> {
        let tokens = drop_stopwords(tokenize(cleaned), &self.stopwords);
        lemmatize(tokens, &self.lemmatizer)
    }

    /// Cleans and tokenizes one post. `None` when nothing survives.
    pub fn document(&self, post: &Post) -> Option<Document> {
        let merged = merge_title_body(post).ok()?;
        let text = clean(&merged, &self.rules);
        let tokens = self.tokens(&text);
        if text.is_empty() || tokens.is_empty() {
            return None;
        }
        Some(Document {
            post_id: post.post_id.clone(),
            user_id: post.user_id.clone(),
            text,
            tokens,
            label: post.label,
        })
    }

    /// Converts posts to documents, dropping empty ones and then duplicates.
    pub fn documents(&self, posts: &[Post]) -> (Vec<Document>, PrepReport) {
        let docs: Vec<Document> = posts.iter().filter_map(|p| self.document(p)).collect();
        let dropped_empty = posts.len() - docs.len();
        let before = docs.len();
        let docs = crate::corpus::dedupe(docs);
        let report = PrepReport {
            posts: posts.len(),
            dropped_empty,
            dropped_duplicate: before - docs.len(),
            documents: docs.len(),
        };
        (docs, report)
    }
}
