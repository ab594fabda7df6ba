use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confusion matrix (rows = true class, columns = predicted) and the rates
/// derived from it. Empty denominators yield 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: Vec<Vec<u64>>,
    pub samples: u64,
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl Metrics {
    pub fn from_predictions(truth: &[usize], predicted: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Shape {
                context: "predictions",
                expected: vec![truth.len()],
                actual: vec![predicted.len()],
            });
        }
        let mut confusion = vec![vec![0u64; classes]; classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(Error::InvalidArgument(format!(
                    "class index outside 0..{classes}"
                )));
            }
            confusion[t][p] += 1;
        }
        Ok(Self::from_confusion(confusion))
    }

    pub fn from_confusion(confusion: Vec<Vec<u64>>) -> Self {
        let classes = confusion.len();
        let samples: u64 = confusion.iter().flatten().sum();
        let correct: u64 = (0..classes).map(|c| confusion[c][c]).sum();
        let mut precision = Vec::with_capacity(classes);
        let mut recall = Vec::with_capacity(classes);
        let mut f1 = Vec::with_capacity(classes);
        for c in 0..classes {
            let tp = confusion[c][c];
            let predicted: u64 = confusion.iter().map(|row| row[c]).sum();
            let actual: u64 = confusion[c].iter().sum();
            let p = ratio(tp, predicted);
            let r = ratio(tp, actual);
            precision.push(p);
            recall.push(r);
            f1.push(if p + r == 0.0 {
                0.0
            } else {
                2.0 * p * r / (p + r)
            });
        }
        Metrics {
            accuracy: ratio(correct, samples),
            macro_precision: mean(&precision),
            macro_recall: mean(&recall),
            macro_f1: mean(&f1),
            confusion,
            samples,
            precision,
            recall,
            f1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_confusion_example() {
        let m = Metrics::from_predictions(&[0, 1, 2, 3], &[0, 1, 2, 2], 4).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.precision, [1.0, 1.0, 0.5, 0.0]);
        assert_eq!(m.recall, [1.0, 1.0, 1.0, 0.0]);
        assert!((m.f1[2] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.f1[3], 0.0);
        assert!((m.macro_f1 - (2.0 + 2.0 / 3.0) / 4.0).abs() < 1e-15);
        assert_eq!(m.macro_precision, 0.625);
        assert_eq!(m.macro_recall, 0.75);
    }

    #[test]
    fn perfect_and_collapsed() {
        let truth = [0, 1, 2, 3, 0, 1, 2, 3];
        let m = Metrics::from_predictions(&truth, &truth, 4).unwrap();
        assert_eq!(
            (m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1),
            (1.0, 1.0, 1.0, 1.0)
        );
        let m = Metrics::from_predictions(&truth, &[1; 8], 4).unwrap();
        assert_eq!(m.accuracy, 0.25);
        let row_sums: Vec<u64> = m.confusion.iter().map(|r| r.iter().sum()).collect();
        assert_eq!(row_sums, [2, 2, 2, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Metrics::from_predictions(&[0], &[0, 1], 4).is_err());
        assert!(Metrics::from_predictions(&[4], &[0], 4).is_err());
    }
}
