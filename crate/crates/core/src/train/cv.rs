//! Fold orchestration, the cross-modality ablation and the hyperparameter
//! sweep.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MffbmConfig, MffbmModel, Sample};
use crate::tensor::Tensor;
use crate::train::metrics::{argmax_rows, evaluate, MetricsReport};
use crate::train::protocol::{augment_sample, source_subject, validation_split, FoldSplit};
use crate::train::trainer::{train, History};
use crate::train::TrainConfig;

pub const WITH_CROSS_MODALITY: &str = "with_cross_modality";
pub const WITHOUT_CROSS_MODALITY: &str = "without_cross_modality";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub test_ids: Vec<String>,
    pub y_true: Vec<usize>,
    pub y_pred: Vec<usize>,
    /// Test-set class probabilities, one row per test subject.
    pub probs: Vec<Vec<f64>>,
    pub report: MetricsReport,
    pub history: History,
    /// Training samples after augmentation (originals included).
    pub n_train: usize,
    pub n_val: usize,
    /// Subjects augmentation had to skip for lack of response blocks.
    pub augmentation_skipped: Vec<String>,
}

/// Unweighted mean over folds of each fold's support-weighted metrics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f2: f64,
}

impl MeanMetrics {
    pub fn of(reports: &[&MetricsReport]) -> Self {
        let n = reports.len().max(1) as f64;
        let mut m = MeanMetrics::default();
        for r in reports {
            m.accuracy += r.accuracy / n;
            m.precision += r.weighted.precision / n;
            m.recall += r.weighted.recall / n;
            m.specificity += r.weighted.specificity / n;
            m.f2 += r.weighted.f2 / n;
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldOutcome>,
    pub mean: MeanMetrics,
    /// Report over all test predictions pooled across folds.
    pub pooled: MetricsReport,
}

impl CvResult {
    fn assemble(folds: Vec<FoldOutcome>, n_classes: usize) -> Result<Self> {
        let mean = MeanMetrics::of(&folds.iter().map(|f| &f.report).collect::<Vec<_>>());
        let y_true: Vec<usize> = folds.iter().flat_map(|f| f.y_true.iter().copied()).collect();
        let y_pred: Vec<usize> = folds.iter().flat_map(|f| f.y_pred.iter().copied()).collect();
        let rows: Vec<Vec<f64>> = folds.iter().flat_map(|f| f.probs.iter().cloned()).collect();
        let scores = Tensor::from_rows(&rows)?;
        let pooled = evaluate(&y_true, &y_pred, Some(&scores), n_classes)?;
        Ok(CvResult { folds, mean, pooled })
    }
}

fn lookup<'a>(index: &HashMap<&str, &'a Sample>, ids: &[String]) -> Result<Vec<&'a Sample>> {
    ids.iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::invalid(format!("split refers to unknown subject {id}")))
        })
        .collect()
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_add(fold as u64)
}

/// A model fitted by [`fit_model`].
#[derive(Clone, Debug)]
pub struct Fitted {
    pub model: MffbmModel,
    pub history: History,
    pub n_train: usize,
    pub n_val: usize,
    pub augmentation_skipped: Vec<String>,
}

/// Holds out a seeded share of `train_set` for early stopping, augments the
/// rest (never the held-out part) and trains a fresh model seeded with
/// `model_cfg.seed + offset`. Samples deriving from `forbidden` subjects are
/// rejected.
pub fn fit_model(
    train_set: &[&Sample],
    offset: usize,
    model_cfg: &MffbmConfig,
    train_cfg: &TrainConfig,
    forbidden: &HashSet<&str>,
) -> Result<Fitted> {
    let seed = fold_seed(train_cfg.seed, offset);
    let (fit, val) = validation_split(train_set, train_cfg.validation_fraction, seed);
    let mut augmented: Vec<Sample> = Vec::new();
    let mut skipped = Vec::new();
    if train_cfg.augment_times > 0 {
        for (i, s) in fit.iter().enumerate() {
            let (copies, flagged) = augment_sample(s, train_cfg.augment_times, seed ^ ((i as u64) << 20));
            if flagged {
                skipped.push(s.subject_id.clone());
            }
            augmented.extend(copies.into_iter().skip(1));
        }
    }
    let fit_set: Vec<&Sample> = fit.iter().copied().chain(augmented.iter()).collect();
    for s in fit_set.iter().chain(&val) {
        if forbidden.contains(source_subject(&s.subject_id)) {
            return Err(Error::invalid(format!(
                "training sample {} derives from a held-out subject",
                s.subject_id
            )));
        }
    }
    let mut mcfg = model_cfg.clone();
    mcfg.seed = fold_seed(model_cfg.seed, offset);
    let mut tcfg = train_cfg.clone();
    tcfg.seed = seed;
    let mut model = MffbmModel::new(mcfg)?;
    let history = train(&mut model, &fit_set, &val, &tcfg)?;
    Ok(Fitted {
        model,
        history,
        n_train: fit_set.len(),
        n_val: val.len(),
        augmentation_skipped: skipped,
    })
}

/// Trains on one split and evaluates on its test subjects. Model and
/// training seeds are offset by the fold index.
pub fn run_fold(samples: &[Sample], split: &FoldSplit, model_cfg: &MffbmConfig, train_cfg: &TrainConfig) -> Result<FoldOutcome> {
    let index: HashMap<&str, &Sample> = samples.iter().map(|s| (s.subject_id.as_str(), s)).collect();
    let train_set = lookup(&index, &split.train)?;
    let test_set = lookup(&index, &split.test)?;
    if test_set.is_empty() {
        return Err(Error::invalid(format!("fold {} has no test subjects", split.fold)));
    }
    let test_ids: HashSet<&str> = split.test.iter().map(String::as_str).collect();
    let fitted = fit_model(&train_set, split.fold, model_cfg, train_cfg, &test_ids)
        .map_err(|e| match e {
            Error::InvalidInput(msg) => Error::invalid(format!("fold {}: {msg}", split.fold)),
            other => other,
        })?;
    let model = &fitted.model;
    let probs = model.predict_samples(&test_set)?;
    let y_true: Vec<usize> = test_set.iter().map(|s| s.label).collect();
    let y_pred = argmax_rows(&probs);
    let report = evaluate(&y_true, &y_pred, Some(&probs), model.config().n_classes)?;
    Ok(FoldOutcome {
        fold: split.fold,
        test_ids: split.test.clone(),
        y_true,
        y_pred,
        probs: probs.to_rows(),
        report,
        history: fitted.history,
        n_train: fitted.n_train,
        n_val: fitted.n_val,
        augmentation_skipped: fitted.augmentation_skipped,
    })
}

/// Runs every split, optionally in parallel. Results come back in split
/// order either way, and each fold is seed-deterministic.
pub fn cross_validate(
    samples: &[Sample],
    splits: &[FoldSplit],
    model_cfg: &MffbmConfig,
    train_cfg: &TrainConfig,
    parallel: bool,
) -> Result<CvResult> {
    model_cfg.validate()?;
    train_cfg.validate()?;
    if splits.is_empty() {
        return Err(Error::invalid("no folds to run"));
    }
    let folds: Vec<FoldOutcome> = if parallel {
        splits.par_iter().map(|s| run_fold(samples, s, model_cfg, train_cfg)).collect::<Result<_>>()?
    } else {
        splits.iter().map(|s| run_fold(samples, s, model_cfg, train_cfg)).collect::<Result<_>>()?
    };
    CvResult::assemble(folds, model_cfg.n_classes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationArm {
    pub name: String,
    pub n_layers: usize,
    pub result: CvResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub splits: Vec<FoldSplit>,
    pub arms: Vec<AblationArm>,
}

impl AblationReport {
    pub fn arm(&self, name: &str) -> Option<&AblationArm> {
        self.arms.iter().find(|a| a.name == name)
    }
}

/// Full model versus the same model with the graph trunk removed (`L = 0`),
/// on identical splits and seeds.
pub fn ablate_cross_modality(
    samples: &[Sample],
    splits: &[FoldSplit],
    model_cfg: &MffbmConfig,
    train_cfg: &TrainConfig,
    parallel: bool,
) -> Result<AblationReport> {
    if !model_cfg.uses_graph() {
        return Err(Error::Config(
            "ablation needs at least two modalities and n_layers >= 1 in the full arm".into(),
        ));
    }
    let mut without = model_cfg.clone();
    without.n_layers = 0;
    let mut arms = Vec::with_capacity(2);
    for (name, cfg) in [(WITH_CROSS_MODALITY, model_cfg), (WITHOUT_CROSS_MODALITY, &without)] {
        arms.push(AblationArm {
            name: name.to_string(),
            n_layers: cfg.n_layers,
            result: cross_validate(samples, splits, cfg, train_cfg, parallel)?,
        });
    }
    Ok(AblationReport {
        splits: splits.to_vec(),
        arms,
    })
}

/// Candidate values for the sweep; `k` sets `k` uniformly weighted low-pass
/// filters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub phi: Vec<f64>,
    pub a: Vec<f64>,
    pub k: Vec<usize>,
    pub n_layers: Vec<usize>,
}

impl GridSpec {
    /// The single point given by `cfg`.
    pub fn from_config(cfg: &MffbmConfig) -> Self {
        GridSpec {
            phi: vec![cfg.phi],
            a: vec![cfg.a],
            k: vec![cfg.k()],
            n_layers: vec![cfg.n_layers],
        }
    }

    pub fn configs(&self, base: &MffbmConfig) -> Vec<MffbmConfig> {
        let mut out = Vec::new();
        for &phi in &self.phi {
            for &a in &self.a {
                for &k in &self.k {
                    for &n_layers in &self.n_layers {
                        let mut c = base.clone();
                        c.phi = phi;
                        c.a = a;
                        c.phi_i = MffbmConfig::uniform_filters(k);
                        c.n_layers = n_layers;
                        out.push(c);
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub phi: f64,
    pub a: f64,
    pub k: usize,
    pub n_layers: usize,
    pub mean: MeanMetrics,
}

/// Cross-validates every grid point on the same splits. Points come back in
/// grid order; pick the best by `mean.f2`.
pub fn grid_search(
    samples: &[Sample],
    splits: &[FoldSplit],
    base: &MffbmConfig,
    grid: &GridSpec,
    train_cfg: &TrainConfig,
    parallel: bool,
) -> Result<Vec<GridPoint>> {
    let configs = grid.configs(base);
    if configs.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    configs
        .into_iter()
        .map(|c| {
            let r = cross_validate(samples, splits, &c, train_cfg, parallel)?;
            Ok(GridPoint {
                phi: c.phi,
                a: c.a,
                k: c.k(),
                n_layers: c.n_layers,
                mean: r.mean,
            })
        })
        .collect()
}
