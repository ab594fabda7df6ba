//! Vocabulary, word-vector ingestion, and fixed-length encoding.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Bound of the uniform distribution for vectors without a pretrained value.
pub const INIT_RANGE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from tokens that will receive indices 2, 3, ...
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Result<Self> {
        let mut vocab = Vocabulary {
            tokens: vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()],
            index: HashMap::new(),
        };
        for token in tokens {
            let next = vocab.tokens.len();
            if vocab.index.insert(token.clone(), next).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate token `{token}`")));
            }
            vocab.tokens.push(token);
        }
        Ok(vocab)
    }

    /// Number of rows including PAD and UNK.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    /// Tokens with index >= 2, in index order.
    pub fn words(&self) -> &[String] {
        &self.tokens[2..]
    }

    /// Writes `token,index` rows, reserved entries included.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::Writer::from_writer(BufWriter::new(file));
        writer.write_record(["token", "index"])?;
        for (i, token) in self.tokens.iter().enumerate() {
            writer.write_record([token.as_str(), &i.to_string()])?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Reads the word-vector text format: a `<count> <dim>` header followed by
/// `token v1 ... vD` lines.
///
/// File tokens take indices from 2 in file order. The PAD row is zero and the
/// UNK row is drawn from `U(-0.05, 0.05)` with `seed`.
pub fn load_embeddings(path: &Path, seed: u64) -> Result<(Vocabulary, Tensor)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(BufReader::new(file), seed)
}

pub fn parse_embeddings<R: BufRead>(reader: R, seed: u64) -> Result<(Vocabulary, Tensor)> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parse_count = |s: &str| s.parse::<usize>().ok();
    let (count, dim) = match fields.as_slice() {
        [c, d] => match (parse_count(c), parse_count(d)) {
            (Some(c), Some(d)) if d > 0 => (c, d),
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("malformed header `{header}`"),
                })
            }
        },
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("header must be `<vocab> <dim>`, got `{header}`"),
            })
        }
    };

    let mut tokens = Vec::with_capacity(count);
    let mut first_line: HashMap<String, usize> = HashMap::new();
    let mut values = vec![0.0; 2 * dim];
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-empty line").to_string();
        let mut n = 0;
        for part in parts {
            let v: f64 = part.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("non-numeric vector entry `{part}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite vector entry `{part}`"),
                });
            }
            values.push(v);
            n += 1;
        }
        if n != dim {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {dim} values for `{token}`, found {n}"),
            });
        }
        if let Some(first) = first_line.get(&token) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate token `{token}` on lines {first} and {line_no}"),
            });
        }
        first_line.insert(token.clone(), line_no);
        tokens.push(token);
    }
    if tokens.len() != count {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "header mismatch: header declares {count} vectors, body has {}",
                tokens.len()
            ),
        });
    }
    let mut r = rng::seeded(rng::mix(seed, &[UNK as u64]));
    for v in &mut values[dim..2 * dim] {
        *v = (2.0 * rng::unit(&mut r) - 1.0) * INIT_RANGE;
    }
    let vocab = Vocabulary::from_tokens(tokens)?;
    let matrix = Tensor::from_vec(&[vocab.len(), dim], values)?;
    Ok((vocab, matrix))
}

/// Writes a matrix in the word-vector text format, skipping the PAD and UNK rows.
pub fn write_embeddings(path: &Path, vocab: &Vocabulary, matrix: &Tensor) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let dim = matrix.dim(1);
    let io = |e| Error::io(path, e);
    writeln!(w, "{} {}", vocab.len() - 2, dim).map_err(io)?;
    for (i, token) in vocab.words().iter().enumerate() {
        write!(w, "{token}").map_err(io)?;
        for v in matrix.row(i + 2) {
            write!(w, " {v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Corpus vocabulary: tokens seen at least `min_count` times, most frequent
/// first, ties in lexicographic order.
pub fn build_vocab(docs: &[Document], min_count: usize) -> Result<Vocabulary> {
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for doc in docs {
        for t in &doc.tokens {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = freq.into_iter().filter(|&(_, c)| c >= min_count).collect();
    if kept.is_empty() {
        return Err(Error::Empty("vocabulary is empty".into()));
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::from_tokens(kept.into_iter().map(|(t, _)| t.to_string()))
}

/// Random `U(-0.05, 0.05)` matrix with a zero PAD row.
pub fn random_embeddings(vocab_size: usize, dim: usize, seed: u64) -> Tensor {
    let mut r = rng::seeded(rng::mix(seed, &[0xe4bed]));
    let mut m = Tensor::uniform(&[vocab_size, dim], INIT_RANGE, &mut r);
    m.row_mut(PAD).fill(0.0);
    m
}

/// Maps tokens to indices, keeping the last `max_len` and left-padding with PAD.
pub fn encode(tokens: &[String], vocab: &Vocabulary, max_len: usize) -> Vec<usize> {
    let tail = &tokens[tokens.len().saturating_sub(max_len)..];
    let mut out = vec![PAD; max_len - tail.len()];
    out.extend(tail.iter().map(|t| vocab.get(t).unwrap_or(UNK)));
    out
}

/// Inverse of [`encode`]: drops padding and renders unknown tokens as `<unk>`.
pub fn decode(indices: &[usize], vocab: &Vocabulary) -> Vec<String> {
    indices
        .iter()
        .filter(|&&i| i != PAD)
        .map(|&i| vocab.token(i).unwrap_or(UNK_TOKEN).to_string())
        .collect()
}
