//! Report artifacts: metrics JSON, ROC and per-fold CSVs, SVG figures and a
//! plain-text summary.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::train::{evaluate, AblationReport, ClassRoc, CvResult, MeanMetrics, MetricsReport};

pub const RESULTS_FILE: &str = "results.json";
pub const ABLATION_FILE: &str = "ablation.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const ROC_FILE: &str = "roc.csv";
pub const PER_FOLD_FILE: &str = "per_fold.csv";
pub const ROC_SVG: &str = "roc.svg";
pub const BOXPLOT_SVG: &str = "boxplot.svg";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocRecord {
    pub class: usize,
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

pub fn roc_records(rocs: &[ClassRoc]) -> Vec<RocRecord> {
    rocs.iter()
        .flat_map(|r| {
            r.points.iter().map(move |p| RocRecord {
                class: r.class,
                fpr: p.fpr,
                tpr: p.tpr,
                threshold: p.threshold,
            })
        })
        .collect()
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

fn from_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// `class,fpr,tpr,threshold`; the first point of each class has threshold
/// `inf`.
pub fn roc_csv(rocs: &[ClassRoc]) -> Result<String> {
    to_csv(&roc_records(rocs))
}

pub fn parse_roc_csv(text: &str) -> Result<Vec<RocRecord>> {
    from_csv(text)
}

/// One row per (arm, fold): the fold's support-weighted metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRow {
    pub arm: String,
    pub fold: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f2: f64,
}

pub fn fold_rows(arm: &str, cv: &CvResult) -> Vec<FoldRow> {
    cv.folds
        .iter()
        .map(|f| FoldRow {
            arm: arm.to_string(),
            fold: f.fold,
            accuracy: f.report.accuracy,
            precision: f.report.weighted.precision,
            recall: f.report.weighted.recall,
            specificity: f.report.weighted.specificity,
            f2: f.report.weighted.f2,
        })
        .collect()
}

pub fn per_fold_csv(rows: &[FoldRow]) -> Result<String> {
    to_csv(rows)
}

pub fn parse_per_fold_csv(text: &str) -> Result<Vec<FoldRow>> {
    from_csv(text)
}

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>
<line x1="{MARGIN}" y1="{}" x2="{}" y2="{}" stroke="black"/>
<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{}" stroke="black"/>
"#,
        W / 2.0,
        escape(title),
        H - MARGIN,
        W - MARGIN,
        H - MARGIN,
        H - MARGIN,
    );
    s
}

fn px(x: f64) -> f64 {
    MARGIN + x * (W - 2.0 * MARGIN)
}

fn py(y: f64) -> f64 {
    H - MARGIN - y * (H - 2.0 * MARGIN)
}

/// One-vs-rest ROC curves with the chance diagonal.
pub fn roc_svg(rocs: &[ClassRoc], title: &str) -> String {
    let mut s = svg_open(title);
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 3"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    for (i, r) in rocs.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if !r.points.is_empty() {
            let pts: Vec<String> = r.points.iter().map(|p| format!("{:.2},{:.2}", px(p.fpr), py(p.tpr))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        }
        let label = match r.auc {
            Some(a) => format!("class {} (AUC {a:.3})", r.class),
            None => format!("class {} (AUC undefined)", r.class),
        };
        let y = MARGIN + 16.0 * i as f64 + 12.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y}" fill="{color}" text-anchor="end">{}</text>"#,
            W - MARGIN - 4.0,
            escape(&label)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">false positive rate</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">true positive rate</text>"#,
        H / 2.0,
        H / 2.0
    );
    s.push_str("</svg>\n");
    s
}

/// Five-number summary with linear interpolation between order statistics.
pub fn quartiles(values: &[f64]) -> Option<[f64; 5]> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Some([v[0], q(0.25), q(0.5), q(0.75), v[v.len() - 1]])
}

/// Box plots of one metric per group, on a `[0, 1]` axis.
pub fn boxplot_svg(groups: &[(String, Vec<f64>)], title: &str) -> String {
    let mut s = svg_open(title);
    let slot = (W - 2.0 * MARGIN) / groups.len().max(1) as f64;
    for (i, (name, values)) in groups.iter().enumerate() {
        let cx = MARGIN + slot * (i as f64 + 0.5);
        let half = slot * 0.2;
        let color = COLORS[i % COLORS.len()];
        if let Some([min, q1, med, q3, max]) = quartiles(values) {
            let _ = writeln!(
                s,
                r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
                py(min),
                py(max)
            );
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.4" stroke="{color}"/>"#,
                cx - half,
                py(q3),
                2.0 * half,
                (py(q1) - py(q3)).max(0.5)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
                cx - half,
                py(med),
                cx + half,
                py(med)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{}" text-anchor="middle">{}</text>"#,
            H - MARGIN + 16.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// ROC curves are not serialized with the report; rebuild them from the
/// pooled fold predictions.
pub fn pooled_with_roc(cv: &CvResult) -> Result<MetricsReport> {
    let y_true: Vec<usize> = cv.folds.iter().flat_map(|f| f.y_true.iter().copied()).collect();
    let y_pred: Vec<usize> = cv.folds.iter().flat_map(|f| f.y_pred.iter().copied()).collect();
    let rows: Vec<Vec<f64>> = cv.folds.iter().flat_map(|f| f.probs.iter().cloned()).collect();
    evaluate(&y_true, &y_pred, Some(&Tensor::from_rows(&rows)?), cv.pooled.n_classes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub mean_over_folds: MeanMetrics,
    pub pooled: MetricsReport,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportOutcome {
    pub written: Vec<String>,
    pub missing: Vec<String>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>> {
    match std::fs::read_to_string(path) {
        Ok(text) => Ok(Some(serde_json::from_str(&text)?)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

const BOX_METRICS: [&str; 5] = ["accuracy", "precision", "recall", "specificity", "f2"];

fn metric(row: &FoldRow, name: &str) -> f64 {
    match name {
        "accuracy" => row.accuracy,
        "precision" => row.precision,
        "recall" => row.recall,
        "specificity" => row.specificity,
        _ => row.f2,
    }
}

/// Regenerates every report artifact from the result files in `run_dir`.
/// Sections whose inputs are absent are listed in the summary instead.
pub fn emit_report(run_dir: &Path) -> Result<ReportOutcome> {
    if !run_dir.is_dir() {
        return Err(Error::invalid(format!("{} is not a directory", run_dir.display())));
    }
    let cv: Option<CvResult> = read_json(&run_dir.join(RESULTS_FILE))?;
    let ablation: Option<AblationReport> = read_json(&run_dir.join(ABLATION_FILE))?;
    let mut out = ReportOutcome::default();
    let mut summary = String::new();
    let _ = writeln!(summary, "run: {}", run_dir.display());
    if run_dir.join(super::experiment::FAILED_MARKER).exists() {
        let _ = writeln!(summary, "status: FAILED (see {})", super::experiment::FAILED_MARKER);
    }

    let write = |name: &str, body: &str, out: &mut ReportOutcome| -> Result<()> {
        std::fs::write(run_dir.join(name), body)?;
        out.written.push(name.to_string());
        Ok(())
    };

    let mut rows: Vec<FoldRow> = Vec::new();
    match &cv {
        Some(cv) => {
            let pooled = pooled_with_roc(cv)?;
            let m = &cv.mean;
            let _ = writeln!(
                summary,
                "mean over {} folds: accuracy {:.4}  precision {:.4}  recall {:.4}  specificity {:.4}  F2 {:.4}",
                cv.folds.len(),
                m.accuracy,
                m.precision,
                m.recall,
                m.specificity,
                m.f2
            );
            for (k, auc) in pooled.auc.iter().enumerate() {
                match auc {
                    Some(a) => {
                        let _ = writeln!(summary, "pooled AUC class {k}: {a:.4}");
                    }
                    None => {
                        let _ = writeln!(summary, "pooled AUC class {k}: undefined");
                    }
                }
            }
            let metrics = MetricsSummary {
                mean_over_folds: cv.mean,
                pooled: pooled.clone(),
            };
            write(METRICS_FILE, &serde_json::to_string_pretty(&metrics)?, &mut out)?;
            write(ROC_FILE, &roc_csv(&pooled.roc)?, &mut out)?;
            write(ROC_SVG, &roc_svg(&pooled.roc, "One-vs-rest ROC (pooled test folds)"), &mut out)?;
            rows.extend(fold_rows("model", cv));
        }
        None => out.missing.push("cross-validation results".into()),
    }
    match &ablation {
        Some(ab) => {
            for arm in &ab.arms {
                let _ = writeln!(summary, "ablation {}: mean F2 {:.4}", arm.name, arm.result.mean.f2);
                rows.extend(fold_rows(&arm.name, &arm.result));
            }
        }
        None => out.missing.push("ablation".into()),
    }
    if rows.is_empty() {
        out.missing.push("per-fold metrics".into());
    } else {
        write(PER_FOLD_FILE, &per_fold_csv(&rows)?, &mut out)?;
        let mut arms: Vec<&str> = Vec::new();
        for r in &rows {
            if !arms.contains(&r.arm.as_str()) {
                arms.push(&r.arm);
            }
        }
        let mut groups = Vec::new();
        for metric_name in BOX_METRICS {
            for arm in &arms {
                let vals: Vec<f64> = rows.iter().filter(|r| r.arm == *arm).map(|r| metric(r, metric_name)).collect();
                let label = if arms.len() > 1 { format!("{metric_name} ({arm})") } else { metric_name.to_string() };
                groups.push((label, vals));
            }
        }
        write(BOXPLOT_SVG, &boxplot_svg(&groups, "Per-fold metrics"), &mut out)?;
    }
    for m in &out.missing {
        let _ = writeln!(summary, "missing: {m}");
    }
    write(SUMMARY_FILE, &summary, &mut out)?;
    Ok(out)
}
