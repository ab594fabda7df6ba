//! Post-level weak labels derived from user-level labels.
//!
//! Every post inherits its author's label; frequent n-grams are weighted by a
//! class-level TF-IDF on a signed severity axis; a post's score is the mean
//! weight of its matched n-grams; quantile thresholds cut the scores into the
//! four risk classes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, RiskLabel, NUM_CLASSES};
use crate::error::{Error, Result};

/// Default severity scalars, ascending with risk.
pub const DEFAULT_SEVERITY: [f64; NUM_CLASSES] = [-1.5, -0.5, 0.5, 1.5];

/// Class sizes reported for the annotated corpus, used as default calibration targets.
pub const REFERENCE_CLASS_COUNTS: [u64; NUM_CLASSES] = [14_849, 13_691, 13_462, 13_678];

pub fn reference_fractions() -> [f64; NUM_CLASSES] {
    let total: u64 = REFERENCE_CLASS_COUNTS.iter().sum();
    REFERENCE_CLASS_COUNTS.map(|c| c as f64 / total as f64)
}

/// Sets each document's label to its author's label.
pub fn propagate_user_labels(
    docs: &mut [Document],
    user_labels: &HashMap<String, RiskLabel>,
) -> Result<()> {
    for doc in docs.iter_mut() {
        let label = user_labels.get(&doc.user_id).ok_or_else(|| {
            Error::InvalidArgument(format!("user `{}` has no label", doc.user_id))
        })?;
        doc.label = Some(*label);
    }
    Ok(())
}

fn check_order(n: usize) -> Result<()> {
    if (1..=3).contains(&n) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "n-gram order {n} outside 1..=3"
        )))
    }
}

/// Space-joined sliding windows of length `n`.
pub fn ngrams(tokens: &[String], n: usize) -> impl Iterator<Item = String> + '_ {
    tokens
        .windows(n.max(1))
        .filter(move |_| n > 0)
        .map(|w| w.join(" "))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NgramTable {
    pub n: usize,
    pub counts: BTreeMap<String, u64>,
    pub per_class: [BTreeMap<String, u64>; NUM_CLASSES],
}

impl NgramTable {
    /// Adds another table's counts. Addition is commutative, so per-shard
    /// tables can be merged in any order.
    pub fn merge(&mut self, other: &NgramTable) {
        for (g, c) in &other.counts {
            *self.counts.entry(g.clone()).or_default() += c;
        }
        for (mine, theirs) in self.per_class.iter_mut().zip(&other.per_class) {
            for (g, c) in theirs {
                *mine.entry(g.clone()).or_default() += c;
            }
        }
    }
}

pub fn count_ngrams(docs: &[Document], n: usize) -> Result<NgramTable> {
    check_order(n)?;
    let mut table = NgramTable {
        n,
        ..Default::default()
    };
    for doc in docs {
        let label = doc
            .label
            .ok_or_else(|| Error::Unlabeled(doc.post_id.clone()))?;
        for g in ngrams(&doc.tokens, n) {
            *table.per_class[label.index()].entry(g.clone()).or_default() += 1;
            *table.counts.entry(g).or_default() += 1;
        }
    }
    Ok(table)
}

/// The `k` most frequent entries; equal counts are ordered lexicographically.
pub fn top_counts(counts: &BTreeMap<String, u64>, k: usize) -> Vec<(String, u64)> {
    let mut entries: Vec<(String, u64)> = counts.iter().map(|(g, &c)| (g.clone(), c)).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    entries.truncate(k);
    entries
}

pub fn top_terms(table: &NgramTable, k: usize) -> Vec<String> {
    top_counts(&table.counts, k)
        .into_iter()
        .map(|(g, _)| g)
        .collect()
}

/// Tokenized documents grouped by class.
#[derive(Debug, Clone, Default)]
pub struct ClassCorpora {
    pub classes: [Vec<Vec<String>>; NUM_CLASSES],
}

impl ClassCorpora {
    pub fn from_documents(docs: &[Document]) -> Result<Self> {
        let mut corpora = ClassCorpora::default();
        for doc in docs {
            let label = doc
                .label
                .ok_or_else(|| Error::Unlabeled(doc.post_id.clone()))?;
            corpora.classes[label.index()].push(doc.tokens.clone());
        }
        Ok(corpora)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermWeights {
    pub weights: BTreeMap<String, f64>,
    pub severity: [f64; NUM_CLASSES],
}

/// Class-level TF-IDF collapsed onto the severity axis.
///
/// Each class corpus acts as one document of a four-document collection:
/// `tf` is the raw count of the term in the class, `idf = ln(4 / df)` with
/// `df` the number of classes containing it, and the final weight is the
/// severity-weighted mean `sum_c s_c * tf_c * idf / sum_c tf_c`.
pub fn tfidf_weights(
    corpora: &ClassCorpora,
    terms: &[String],
    severity: [f64; NUM_CLASSES],
) -> Result<TermWeights> {
    if let Some(c) = corpora.classes.iter().position(|docs| docs.is_empty()) {
        return Err(Error::InvalidArgument(format!(
            "class {} has no documents",
            RiskLabel::ALL[c]
        )));
    }
    let wanted: BTreeSet<&str> = terms.iter().map(String::as_str).collect();
    let mut orders = BTreeSet::new();
    for term in &wanted {
        let n = term.split(' ').count();
        check_order(n)?;
        orders.insert(n);
    }
    let mut tf: HashMap<&str, [u64; NUM_CLASSES]> = HashMap::new();
    for (c, docs) in corpora.classes.iter().enumerate() {
        for tokens in docs {
            for &n in &orders {
                for window in tokens.windows(n) {
                    let g = window.join(" ");
                    if let Some(term) = wanted.get(g.as_str()) {
                        tf.entry(term).or_default()[c] += 1;
                    }
                }
            }
        }
    }
    let mut weights = BTreeMap::new();
    for term in wanted {
        let Some(counts) = tf.get(term) else { continue };
        let df = counts.iter().filter(|&&c| c > 0).count();
        let idf = (NUM_CLASSES as f64 / df as f64).ln();
        let total: u64 = counts.iter().sum();
        let signed: f64 = counts
            .iter()
            .zip(severity)
            .map(|(&c, s)| s * c as f64 * idf)
            .sum();
        weights.insert(term.to_string(), signed / total as f64);
    }
    Ok(TermWeights { weights, severity })
}

/// Mean weight over every uni-, bi-, and trigram occurrence found in the map.
pub fn post_score(tokens: &[String], weights: &TermWeights) -> f64 {
    let mut matched: Vec<f64> = (1..=3)
        .flat_map(|n| ngrams(tokens, n).filter_map(|g| weights.weights.get(&g).copied()))
        .collect();
    if matched.is_empty() {
        return 0.0;
    }
    // Summing in sorted order makes the result independent of token order.
    matched.sort_by(f64::total_cmp);
    matched.iter().sum::<f64>() / matched.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

impl Thresholds {
    pub fn new(t1: f64, t2: f64, t3: f64) -> Result<Self> {
        if t1 < t2 && t2 < t3 {
            Ok(Thresholds { t1, t2, t3 })
        } else {
            Err(Error::InvalidArgument(format!(
                "thresholds must satisfy t1 < t2 < t3, got ({t1}, {t2}, {t3})"
            )))
        }
    }
}

/// Linear-interpolation quantile of sorted data at probability `q`.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Thresholds at the empirical quantiles of the cumulative target fractions.
///
/// When ties make two quantiles coincide, the later threshold moves up to the
/// next distinct score so that the ordering stays strict.
pub fn calibrate_thresholds(scores: &[f64], fractions: [f64; NUM_CLASSES]) -> Result<Thresholds> {
    if fractions.iter().any(|&f| f.is_nan() || f <= 0.0) {
        return Err(Error::InvalidArgument(
            "target fractions must be positive".into(),
        ));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "target fractions sum to {total}, expected 1"
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("scores must be finite".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < NUM_CLASSES {
        return Err(Error::DegenerateScores);
    }
    let mut cumulative = 0.0;
    let mut cuts = [0.0; 3];
    for (i, cut) in cuts.iter_mut().enumerate() {
        cumulative += fractions[i];
        *cut = quantile(&sorted, cumulative);
    }
    for i in 1..3 {
        if cuts[i] <= cuts[i - 1] {
            cuts[i] = *distinct
                .iter()
                .find(|&&s| s > cuts[i - 1])
                .ok_or(Error::DegenerateScores)?;
        }
    }
    Thresholds::new(cuts[0], cuts[1], cuts[2])
}

pub fn assign_label(score: f64, t: &Thresholds) -> RiskLabel {
    if score <= t.t1 {
        RiskLabel::NoRisk
    } else if score <= t.t2 {
        RiskLabel::LowRisk
    } else if score <= t.t3 {
        RiskLabel::ModerateRisk
    } else {
        RiskLabel::SevereRisk
    }
}

/// Everything the annotation pass produces.
#[derive(Debug, Clone)]
pub struct Annotation {
    pub weights: TermWeights,
    pub thresholds: Thresholds,
    pub scores: Vec<f64>,
    pub labels: Vec<RiskLabel>,
    pub terms: Vec<String>,
}

/// Runs the weak-labeling pass over documents already carrying user labels.
///
/// The weighted vocabulary is the union of the `top_k` most frequent
/// uni-, bi-, and trigrams of each class.
pub fn annotate(
    docs: &[Document],
    top_k: usize,
    severity: [f64; NUM_CLASSES],
    fractions: [f64; NUM_CLASSES],
) -> Result<Annotation> {
    let mut terms = BTreeSet::new();
    for n in 1..=3 {
        let table = count_ngrams(docs, n)?;
        for class in &table.per_class {
            terms.extend(top_counts(class, top_k).into_iter().map(|(g, _)| g));
        }
    }
    let terms: Vec<String> = terms.into_iter().collect();
    let corpora = ClassCorpora::from_documents(docs)?;
    let weights = tfidf_weights(&corpora, &terms, severity)?;
    let scores: Vec<f64> = docs
        .iter()
        .map(|d| post_score(&d.tokens, &weights))
        .collect();
    let thresholds = calibrate_thresholds(&scores, fractions)?;
    let labels = scores
        .iter()
        .map(|&s| assign_label(s, &thresholds))
        .collect();
    Ok(Annotation {
        weights,
        thresholds,
        scores,
        labels,
        terms,
    })
}
