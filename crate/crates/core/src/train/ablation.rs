use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Architecture, ModelParams, Tensor};
use crate::train::fit::{evaluate, fit, EncodedSet, TrainConfig};
use crate::train::metrics::Metrics;
use crate::train::svm::{svm_baseline, SvmConfig};

/// Published accuracy, precision, recall, and F1 (percent) for the five
/// compared models, printed as a non-binding reference.
pub const REFERENCE: [(&str, [f64; 4]); 5] = [
    ("svm", [82.5, 81.1, 84.5, 82.8]),
    ("cnn", [86.6, 87.8, 89.8, 88.8]),
    ("lstm", [87.7, 90.8, 86.5, 88.6]),
    ("lstm-cnn", [88.2, 88.3, 84.4, 86.3]),
    ("lstm-attention-cnn", [90.3, 91.6, 93.7, 92.6]),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: String,
    pub metrics: Metrics,
}

/// Trains the SVM and the four network variants on the same split and seed.
pub fn ablation_suite(
    cfg: &TrainConfig,
    train: &EncodedSet,
    test: &EncodedSet,
    embedding: &Tensor,
) -> Result<Vec<AblationRow>> {
    let svm = SvmConfig {
        seed: cfg.seed,
        ..SvmConfig::default()
    };
    let mut rows = vec![AblationRow {
        model: "svm".into(),
        metrics: svm_baseline(train, test, embedding, cfg.model.classes, &svm)?,
    }];
    for arch in Architecture::ALL {
        let mut variant = cfg.clone();
        variant.model.architecture = arch;
        let params = ModelParams::init(&variant.model, embedding.clone())?;
        let (trained, _) = fit(&variant, train, params)?;
        rows.push(AblationRow {
            model: arch.name().into(),
            metrics: evaluate(&trained, &variant.model, test)?,
        });
    }
    Ok(rows)
}

/// `model,accuracy,precision,recall,f1` with macro-averaged rates.
pub fn write_csv(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "model,accuracy,precision,recall,f1").map_err(io)?;
    for r in rows {
        let m = &r.metrics;
        writeln!(
            w,
            "{},{},{},{},{}",
            r.model, m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Human-readable table with the published figures as a footer.
pub fn render(rows: &[AblationRow]) -> String {
    let mut out = format!(
        "{:<20} {:>9} {:>9} {:>9} {:>9}\n",
        "model", "accuracy", "precision", "recall", "f1"
    );
    for r in rows {
        let m = &r.metrics;
        out += &format!(
            "{:<20} {:>9.4} {:>9.4} {:>9.4} {:>9.4}\n",
            r.model, m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1
        );
    }
    out += "\npublished reference (percent, different data; not a target):\n";
    for (name, v) in REFERENCE {
        out += &format!(
            "{:<20} {:>9.1} {:>9.1} {:>9.1} {:>9.1}\n",
            name, v[0], v[1], v[2], v[3]
        );
    }
    out
}
