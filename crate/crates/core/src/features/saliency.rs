//! Fixation-vs-saliency comparison metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::train::roc::binary_roc;

pub const EPS: f64 = 1e-12;

/// Negative samplings averaged by AUC-Borji and AUC-Shuffled.
pub const AUC_SAMPLINGS: usize = 100;

/// Feature order used for the gaze modality.
pub const METRIC_NAMES: [&str; 8] = [
    "auc_borji",
    "auc_judd",
    "cc",
    "kldiv",
    "nss",
    "similarity",
    "auc_shuffled",
    "info_gain",
];

/// A binary fixation map and a nonnegative saliency map of equal shape.
#[derive(Clone, Debug)]
pub struct SaliencyPair {
    fixation: Tensor,
    saliency: Tensor,
}

impl SaliencyPair {
    pub fn new(fixation: Tensor, saliency: Tensor) -> Result<Self> {
        fixation.dims2()?;
        if fixation.shape() != saliency.shape() {
            return Err(Error::ShapeMismatch {
                op: "saliency pair",
                left: fixation.shape().to_vec(),
                right: saliency.shape().to_vec(),
            });
        }
        if fixation.data().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("fixation map must be binary"));
        }
        if !fixation.data().contains(&1.0) {
            return Err(Error::invalid("fixation map has no fixated pixel"));
        }
        if saliency.data().iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::invalid("saliency map must be finite and nonnegative"));
        }
        if saliency.max_abs() == 0.0 {
            return Err(Error::invalid("saliency map is identically zero"));
        }
        Ok(SaliencyPair { fixation, saliency })
    }

    pub fn fixation(&self) -> &Tensor {
        &self.fixation
    }

    pub fn saliency(&self) -> &Tensor {
        &self.saliency
    }

    fn fixated(&self) -> impl Iterator<Item = usize> + '_ {
        self.fixation.data().iter().enumerate().filter(|(_, &v)| v == 1.0).map(|(i, _)| i)
    }
}

/// The eight metrics; `None` marks a metric that could not be computed from
/// the supplied inputs (or is undefined, e.g. NSS on a constant map).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMetrics {
    pub auc_borji: Option<f64>,
    pub auc_judd: Option<f64>,
    pub cc: Option<f64>,
    pub kldiv: Option<f64>,
    pub nss: Option<f64>,
    pub similarity: Option<f64>,
    pub auc_shuffled: Option<f64>,
    pub info_gain: Option<f64>,
}

impl SaliencyMetrics {
    /// Values in [`METRIC_NAMES`] order.
    pub fn values(&self) -> [Option<f64>; 8] {
        [
            self.auc_borji,
            self.auc_judd,
            self.cc,
            self.kldiv,
            self.nss,
            self.similarity,
            self.auc_shuffled,
            self.info_gain,
        ]
    }

    pub fn missing(&self) -> Vec<&'static str> {
        METRIC_NAMES
            .iter()
            .zip(self.values())
            .filter(|(_, v)| v.is_none())
            .map(|(n, _)| *n)
            .collect()
    }
}

fn sum_normalized(t: &Tensor) -> Vec<f64> {
    let s = t.sum();
    t.data().iter().map(|&v| v / s).collect()
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Pearson correlation; `None` when either map is constant.
pub fn cc(pair: &SaliencyPair) -> Option<f64> {
    let s = pair.saliency.data();
    let f = sum_normalized(&pair.fixation);
    let (ms, ss) = mean_std(s);
    let (mf, sf) = mean_std(&f);
    if ss == 0.0 || sf == 0.0 {
        return None;
    }
    let cov = s.iter().zip(&f).map(|(a, b)| (a - ms) * (b - mf)).sum::<f64>() / s.len() as f64;
    Some((cov / (ss * sf)).clamp(-1.0, 1.0))
}

/// Mean z-scored saliency at fixated pixels (population standard deviation).
pub fn nss(pair: &SaliencyPair) -> Option<f64> {
    let s = pair.saliency.data();
    let (mean, std) = mean_std(s);
    if std == 0.0 {
        return None;
    }
    let (sum, count) = pair.fixated().fold((0.0, 0usize), |(acc, c), i| (acc + (s[i] - mean) / std, c + 1));
    Some(sum / count as f64)
}

pub fn similarity(pair: &SaliencyPair) -> f64 {
    let s = sum_normalized(&pair.saliency);
    let f = sum_normalized(&pair.fixation);
    s.iter().zip(&f).map(|(a, b)| a.min(*b)).sum()
}

/// `Σ F log(F / (S + ε))` over sum-normalized maps; zero-fixation terms vanish.
pub fn kldiv(pair: &SaliencyPair) -> f64 {
    let s = sum_normalized(&pair.saliency);
    let f = sum_normalized(&pair.fixation);
    f.iter()
        .zip(&s)
        .filter(|(fi, _)| **fi > 0.0)
        .map(|(fi, si)| fi * (fi / (si + EPS)).ln())
        .sum()
}

/// Threshold sweep over every distinct saliency value, fixated pixels as
/// positives and all other pixels as negatives.
pub fn auc_judd(pair: &SaliencyPair) -> Option<f64> {
    let pos: Vec<bool> = pair.fixation.data().iter().map(|&v| v == 1.0).collect();
    binary_roc(pair.saliency.data(), &pos).map(|r| r.auc)
}

fn sampled_auc(positives: &[f64], pool: &[f64], seed: u64) -> Option<f64> {
    if pool.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = positives.len();
    let mut labels = vec![true; k];
    labels.resize(2 * k, false);
    let mut scores = positives.to_vec();
    let mut total = 0.0;
    for _ in 0..AUC_SAMPLINGS {
        scores.truncate(k);
        scores.extend((0..k).map(|_| pool[rng.gen_range(0..pool.len())]));
        total += binary_roc(&scores, &labels)?.auc;
    }
    Some(total / AUC_SAMPLINGS as f64)
}

/// Fixated saliency against as many uniformly drawn pixels, averaged over
/// [`AUC_SAMPLINGS`] draws.
pub fn auc_borji(pair: &SaliencyPair, seed: u64) -> Option<f64> {
    let s = pair.saliency.data();
    let pos: Vec<f64> = pair.fixated().map(|i| s[i]).collect();
    sampled_auc(&pos, s, seed)
}

/// Negatives are saliency values at other maps' fixations. `None` when the
/// other maps have no usable fixation or a different shape.
pub fn auc_shuffled(pair: &SaliencyPair, others: &[Tensor], seed: u64) -> Option<f64> {
    let s = pair.saliency.data();
    if others.iter().any(|o| o.shape() != pair.fixation.shape()) {
        return None;
    }
    let pool: Vec<f64> = others
        .iter()
        .flat_map(|o| o.data().iter().enumerate().filter(|(_, &v)| v == 1.0).map(|(i, _)| s[i]))
        .collect();
    let pos: Vec<f64> = pair.fixated().map(|i| s[i]).collect();
    sampled_auc(&pos, &pool, seed)
}

/// Mean over fixations of `log2(S + ε) - log2(B + ε)` on sum-normalized maps.
pub fn info_gain(pair: &SaliencyPair, baseline: &Tensor) -> Option<f64> {
    if baseline.shape() != pair.saliency.shape()
        || baseline.data().iter().any(|&v| !v.is_finite() || v < 0.0)
        || baseline.sum() <= 0.0
    {
        return None;
    }
    let s = sum_normalized(&pair.saliency);
    let b = sum_normalized(baseline);
    let (sum, count) = pair
        .fixated()
        .fold((0.0, 0usize), |(acc, c), i| (acc + (s[i] + EPS).log2() - (b[i] + EPS).log2(), c + 1));
    Some(sum / count as f64)
}

/// All eight metrics. Shuffled AUC needs `other_fixations`, information gain
/// needs `baseline`; without them those entries are `None`.
pub fn saliency_metrics(
    pair: &SaliencyPair,
    other_fixations: Option<&[Tensor]>,
    baseline: Option<&Tensor>,
    seed: u64,
) -> SaliencyMetrics {
    SaliencyMetrics {
        auc_borji: auc_borji(pair, seed),
        auc_judd: auc_judd(pair),
        cc: cc(pair),
        kldiv: Some(kldiv(pair)),
        nss: nss(pair),
        similarity: Some(similarity(pair)),
        auc_shuffled: other_fixations.and_then(|o| auc_shuffled(pair, o, seed)),
        info_gain: baseline.and_then(|b| info_gain(pair, b)),
    }
}
