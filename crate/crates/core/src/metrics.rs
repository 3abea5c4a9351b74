//! Confusion matrices and per-class / macro-averaged classification metrics.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// `C × C` counts; rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(rows: &[Vec<u64>]) -> Result<Self> {
        let classes = rows.len();
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::Dimension("confusion matrix must be square".into()));
        }
        Ok(ConfusionMatrix {
            classes,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.classes + predicted]
    }

    pub fn n_total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.classes.max(1)).map(<[u64]>::to_vec).collect()
    }
}

pub fn confusion_matrix(actual: &[usize], predicted: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(Error::Dimension(format!(
            "{} actual labels vs {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    let mut counts = vec![0u64; classes * classes];
    for (&a, &p) in actual.iter().zip(predicted) {
        if a >= classes || p >= classes {
            return Err(Error::Label(format!(
                "label pair ({a}, {p}) outside 0..{classes}"
            )));
        }
        counts[a * classes + p] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub single_accuracy: f64,
    pub error_single: f64,
    /// `TP / n_total`; these sum to the overall accuracy.
    pub total_accuracy: f64,
    /// `FP / n_total`.
    pub error_total: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub fpr: f64,
    /// Set when a ratio had a zero denominator and was replaced by its
    /// convention (precision/sensitivity 0, specificity 1).
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverallMetrics {
    pub accuracy: f64,
    pub error: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub fpr: f64,
}

fn ratio(num: u64, den: u64, empty: f64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        empty
    } else {
        num as f64 / den as f64
    }
}

pub fn per_class_metrics(cm: &ConfusionMatrix) -> Result<Vec<ClassMetrics>> {
    let total = cm.n_total();
    if total == 0 {
        return Err(Error::Empty("confusion matrix has no samples".into()));
    }
    let c = cm.classes();
    let metrics = (0..c)
        .map(|k| {
            let tp = cm.get(k, k);
            let actual: u64 = (0..c).map(|j| cm.get(k, j)).sum();
            let predicted: u64 = (0..c).map(|i| cm.get(i, k)).sum();
            let fn_ = actual - tp;
            let fp = predicted - tp;
            let tn = total - actual - fp;

            let mut degenerate = false;
            let sensitivity = ratio(tp, tp + fn_, 0.0, &mut degenerate);
            let specificity = ratio(tn, tn + fp, 1.0, &mut degenerate);
            let precision = ratio(tp, tp + fp, 0.0, &mut degenerate);
            ClassMetrics {
                single_accuracy: sensitivity,
                error_single: 1.0 - sensitivity,
                total_accuracy: tp as f64 / total as f64,
                error_total: fp as f64 / total as f64,
                sensitivity,
                specificity,
                precision,
                fpr: 1.0 - specificity,
                degenerate,
            }
        })
        .collect();
    Ok(metrics)
}

impl OverallMetrics {
    /// Accuracy is the sum of the per-class total accuracies; every other
    /// column is the unweighted mean over classes.
    pub fn from_class_metrics(per_class: &[ClassMetrics]) -> Result<Self> {
        if per_class.is_empty() {
            return Err(Error::Empty("no per-class metrics".into()));
        }
        let mean = |f: fn(&ClassMetrics) -> f64| {
            per_class.iter().map(f).sum::<f64>() / per_class.len() as f64
        };
        let accuracy: f64 = per_class.iter().map(|m| m.total_accuracy).sum();
        Ok(OverallMetrics {
            accuracy,
            error: 1.0 - accuracy,
            sensitivity: mean(|m| m.sensitivity),
            specificity: mean(|m| m.specificity),
            precision: mean(|m| m.precision),
            fpr: mean(|m| m.fpr),
        })
    }
}

pub fn overall_metrics(cm: &ConfusionMatrix) -> Result<OverallMetrics> {
    let mut overall = OverallMetrics::from_class_metrics(&per_class_metrics(cm)?)?;
    // exact form; the per-class sum can differ in the last ulp
    overall.accuracy = cm.trace() as f64 / cm.n_total() as f64;
    overall.error = 1.0 - overall.accuracy;
    Ok(overall)
}

pub const REPORT_HEADER: &str =
    "class,single_accuracy,error_single,total_accuracy,error_total,sensitivity,specificity,precision,fpr";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub class_names: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub overall: OverallMetrics,
}

pub fn report(cm: &ConfusionMatrix, class_names: &[String]) -> Result<MetricsReport> {
    if class_names.len() != cm.classes() {
        return Err(Error::Dimension(format!(
            "{} class names for {} classes",
            class_names.len(),
            cm.classes()
        )));
    }
    Ok(MetricsReport {
        class_names: class_names.to_vec(),
        confusion: cm.clone(),
        per_class: per_class_metrics(cm)?,
        overall: overall_metrics(cm)?,
    })
}

impl MetricsReport {
    /// Per-class rows then an `OVERALL` row; numbers use shortest round-trip
    /// formatting so parsing them back is exact.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for (name, m) in self.class_names.iter().zip(&self.per_class) {
            let _ = writeln!(
                out,
                "{name},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                m.single_accuracy,
                m.error_single,
                m.total_accuracy,
                m.error_total,
                m.sensitivity,
                m.specificity,
                m.precision,
                m.fpr
            );
        }
        let o = &self.overall;
        let _ = writeln!(
            out,
            "OVERALL,{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            o.accuracy, o.error, o.accuracy, o.error, o.sensitivity, o.specificity, o.precision, o.fpr
        );
        out
    }

    pub fn to_text(&self) -> String {
        let width = self
            .class_names
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max("OVERALL".len());
        let cols = [
            "single_acc", "err_single", "total_acc", "err_total", "sensitivity", "specificity",
            "precision", "fpr",
        ];
        let mut out = format!("{:<width$}", "class");
        for c in cols {
            let _ = write!(out, " {c:>11}");
        }
        out.push('\n');
        let row = |out: &mut String, name: &str, vals: [f64; 8]| {
            let _ = write!(out, "{name:<width$}");
            for v in vals {
                let _ = write!(out, " {v:>11.6}");
            }
            out.push('\n');
        };
        for (name, m) in self.class_names.iter().zip(&self.per_class) {
            row(
                &mut out,
                name,
                [
                    m.single_accuracy,
                    m.error_single,
                    m.total_accuracy,
                    m.error_total,
                    m.sensitivity,
                    m.specificity,
                    m.precision,
                    m.fpr,
                ],
            );
        }
        let o = &self.overall;
        row(
            &mut out,
            "OVERALL",
            [o.accuracy, o.error, o.accuracy, o.error, o.sensitivity, o.specificity, o.precision, o.fpr],
        );
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
