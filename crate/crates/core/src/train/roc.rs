//! ROC curves and AUC.
//!
//! The area is accumulated from integer TP/FP counts and divided once at the
//! end, so it equals the pairwise (Mann–Whitney) statistic with ties counted
//! as one half bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `>= threshold` are called positive; the first point uses `+inf`.
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinaryRoc {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Sweeps every distinct score as a threshold. `None` when either class is
/// empty.
pub fn binary_roc(scores: &[f64], positive: &[bool]) -> Option<BinaryRoc> {
    assert_eq!(scores.len(), positive.len(), "scores and labels must align");
    let p = positive.iter().filter(|&&b| b).count() as u64;
    let n = positive.len() as u64 - p;
    if p == 0 || n == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut area2 = 0u128;
    let mut i = 0;
    while i < order.len() {
        let thr = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == thr {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - fp0) as u128 * (tp + tp0) as u128;
        points.push(RocPoint {
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
            threshold: thr,
        });
    }
    let auc = area2 as f64 / (2 * p as u128 * n as u128) as f64;
    Some(BinaryRoc { points, auc })
}

/// One-vs-rest curve for a single class.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassRoc {
    pub class: usize,
    pub points: Vec<RocPoint>,
    /// `None` when the class has no positives (or no negatives) in `y_true`.
    pub auc: Option<f64>,
}

/// Per-class one-vs-rest ROC from an `n x c` score matrix.
pub fn roc_auc_ovr(y_true: &[usize], scores: &Tensor) -> Result<Vec<ClassRoc>> {
    let (n, c) = scores.dims2()?;
    if c < 2 {
        return Err(Error::invalid("ROC analysis needs at least two classes"));
    }
    if y_true.len() != n {
        return Err(Error::invalid(format!("{} labels for {n} score rows", y_true.len())));
    }
    if let Some(row) = y_true.iter().position(|&y| y >= c) {
        return Err(Error::Row {
            row,
            reason: format!("label {} out of range for {c} classes", y_true[row]),
        });
    }
    Ok((0..c)
        .map(|k| {
            let col: Vec<f64> = (0..n).map(|i| scores.get(i, k)).collect();
            let pos: Vec<bool> = y_true.iter().map(|&y| y == k).collect();
            match binary_roc(&col, &pos) {
                Some(r) => ClassRoc {
                    class: k,
                    points: r.points,
                    auc: Some(r.auc),
                },
                None => ClassRoc {
                    class: k,
                    points: Vec::new(),
                    auc: None,
                },
            }
        })
        .collect())
}
