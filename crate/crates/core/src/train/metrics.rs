//! Class mapping, confusion-based metrics and the evaluation report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::train::roc::{roc_auc_ovr, ClassRoc};
use crate::train::Task;

/// Maps a PHQ-9 total to a 0-based class index.
///
/// Three-class: 0–4 → 0, 5–14 → 1, 15–27 → 2. Binary: 0–4 → 0 (negative),
/// 5–27 → 1 (positive).
pub fn phq9_to_class(score: u32, task: Task) -> Result<usize> {
    if score > 27 {
        return Err(Error::invalid(format!("PHQ-9 score {score} outside 0..=27")));
    }
    let three = match score {
        0..=4 => 0,
        5..=14 => 1,
        _ => 2,
    };
    Ok(match task {
        Task::ThreeClass => three,
        Task::Binary => usize::from(three > 0),
    })
}

/// Row argmax; ties go to the lowest index.
pub fn argmax_rows(scores: &Tensor) -> Vec<usize> {
    (0..scores.rows())
        .map(|r| {
            let row = scores.row(r);
            (1..row.len()).fold(0, |best, i| if row[i] > row[best] { i } else { best })
        })
        .collect()
}

/// `5PR / (4P + R)`, zero when both are zero.
pub fn f2_score(precision: f64, recall: f64) -> f64 {
    let den = 4.0 * precision + recall;
    if den == 0.0 {
        0.0
    } else {
        5.0 * precision * recall / den
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One-vs-all counts and rates for one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub support: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f2: f64,
}

impl ClassMetrics {
    /// Rates from raw counts; an undefined ratio (zero denominator) is 0.
    pub fn from_counts(class: usize, tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        ClassMetrics {
            class,
            support: tp + fn_,
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            specificity: ratio(tn, tn + fp),
            f2: f2_score(precision, recall),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_classes: usize,
    /// `confusion[true][pred]`.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
    /// Support-weighted averages over classes.
    pub weighted: Averages,
    pub accuracy: f64,
    /// One-vs-rest AUC per class; `None` when undefined.
    pub auc: Vec<Option<f64>>,
    /// Notes about undefined quantities.
    pub flags: Vec<String>,
    #[serde(skip)]
    pub roc: Vec<ClassRoc>,
}

/// Builds the full report. `scores` (`n x c`) enables ROC/AUC.
pub fn evaluate(y_true: &[usize], y_pred: &[usize], scores: Option<&Tensor>, n_classes: usize) -> Result<MetricsReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid(format!(
            "{} labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    if n_classes < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (row, (&t, &p)) in y_true.iter().zip(y_pred).enumerate() {
        if t >= n_classes || p >= n_classes {
            return Err(Error::Row {
                row,
                reason: format!("class index out of range for {n_classes} classes"),
            });
        }
        confusion[t][p] += 1;
    }
    let n = y_true.len();
    let mut flags = Vec::new();
    let per_class: Vec<ClassMetrics> = (0..n_classes)
        .map(|k| {
            let tp = confusion[k][k];
            let fn_ = confusion[k].iter().sum::<usize>() - tp;
            let fp = (0..n_classes).map(|t| confusion[t][k]).sum::<usize>() - tp;
            let tn = n - tp - fn_ - fp;
            if tp + fn_ == 0 {
                flags.push(format!("class {k}: no true samples, recall undefined (reported as 0)"));
            }
            ClassMetrics::from_counts(k, tp, fp, fn_, tn)
        })
        .collect();
    let mut weighted = Averages::default();
    for m in &per_class {
        let w = m.support as f64 / n as f64;
        weighted.precision += w * m.precision;
        weighted.recall += w * m.recall;
        weighted.specificity += w * m.specificity;
        weighted.f2 += w * m.f2;
    }
    let accuracy = ratio((0..n_classes).map(|k| confusion[k][k]).sum(), n);

    let (roc, auc) = match scores {
        Some(s) => {
            if s.shape() != [n, n_classes] {
                return Err(Error::InvalidShape {
                    shape: s.shape().to_vec(),
                    reason: format!("expected {n}x{n_classes} scores"),
                });
            }
            let roc = roc_auc_ovr(y_true, s)?;
            for r in &roc {
                if r.auc.is_none() {
                    flags.push(format!("class {}: AUC undefined (single-class ground truth)", r.class));
                }
            }
            let auc = roc.iter().map(|r| r.auc).collect();
            (roc, auc)
        }
        None => (Vec::new(), vec![None; n_classes]),
    };
    Ok(MetricsReport {
        n_classes,
        confusion,
        per_class,
        weighted,
        accuracy,
        auc,
        flags,
        roc,
    })
}
