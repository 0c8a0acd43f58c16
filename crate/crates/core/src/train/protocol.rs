//! Cross-validation splits, validation carve-out and response-shuffle
//! augmentation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Modality, Sample};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold: usize,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Seeded, stratified `k`-fold partition.
///
/// Subjects are shuffled within each class, the classes are laid end to end
/// and position `i` goes to fold `i mod k`, so fold sizes differ by at most
/// one and every class is spread as evenly as its count allows.
pub fn kfold_split(ids: &[String], labels: &[usize], k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if ids.len() != labels.len() {
        return Err(Error::invalid(format!("{} ids but {} labels", ids.len(), labels.len())));
    }
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if k > ids.len() {
        return Err(Error::Config(format!("{k} folds for {} subjects", ids.len())));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(Error::invalid(format!("duplicate subject id {dup}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    let mut order = Vec::with_capacity(ids.len());
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        order.extend_from_slice(members);
    }
    let mut test: Vec<Vec<String>> = vec![Vec::new(); k];
    for (pos, &i) in order.iter().enumerate() {
        test[pos % k].push(ids[i].clone());
    }
    Ok(test
        .iter()
        .enumerate()
        .map(|(fold, t)| FoldSplit {
            fold,
            train: ids.iter().filter(|id| !t.contains(id)).cloned().collect(),
            test: t.clone(),
        })
        .collect())
}

/// Splits off a seeded `fraction` of `samples` (at least one when
/// `fraction > 0` and two or more samples exist) as a validation set.
pub fn validation_split<'a>(samples: &[&'a Sample], fraction: f64, seed: u64) -> (Vec<&'a Sample>, Vec<&'a Sample>) {
    let n_val = if fraction > 0.0 && samples.len() >= 2 {
        ((samples.len() as f64 * fraction).round() as usize).clamp(1, samples.len() - 1)
    } else {
        0
    };
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (val, train) = idx.split_at(n_val);
    let mut train: Vec<usize> = train.to_vec();
    let mut val: Vec<usize> = val.to_vec();
    train.sort_unstable();
    val.sort_unstable();
    (train.iter().map(|&i| samples[i]).collect(), val.iter().map(|&i| samples[i]).collect())
}

/// Result of [`augment_shuffle_responses`].
#[derive(Clone, Debug, PartialEq)]
pub struct Augmented<T> {
    /// The original first, then one entry per permutation.
    pub samples: Vec<Vec<T>>,
    /// Set when fewer than two blocks made shuffling impossible.
    pub too_few_blocks: bool,
}

/// `times` seeded permutations of the block order, plus the original.
pub fn augment_shuffle_responses<T: Clone>(blocks: &[T], times: usize, seed: u64) -> Augmented<T> {
    let mut samples = vec![blocks.to_vec()];
    if blocks.len() < 2 {
        return Augmented {
            samples,
            too_few_blocks: true,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..times {
        let mut b = blocks.to_vec();
        b.shuffle(&mut rng);
        samples.push(b);
    }
    Augmented {
        samples,
        too_few_blocks: false,
    }
}

/// Id given to the `k`-th shuffled copy of a subject.
pub fn augmented_id(subject: &str, k: usize) -> String {
    format!("{subject}#aug{k}")
}

/// Subject an augmented id derives from.
pub fn source_subject(id: &str) -> &str {
    id.split_once("#aug").map_or(id, |(s, _)| s)
}

fn split_blocks(seq: &Tensor, lengths: &[usize]) -> Option<Vec<Vec<f64>>> {
    if lengths.iter().sum::<usize>() != seq.rows() {
        return None;
    }
    let w = seq.cols();
    let mut start = 0;
    Some(
        lengths
            .iter()
            .map(|&len| {
                let b = seq.data()[start * w..(start + len) * w].to_vec();
                start += len;
                b
            })
            .collect(),
    )
}

/// Shuffles a subject's response blocks, permuting every modality with the
/// same block order. Subjects without consistent segmentation (or with fewer
/// than two blocks) come back unchanged, flagged.
pub fn augment_sample(sample: &Sample, times: usize, seed: u64) -> (Vec<Sample>, bool) {
    let n_blocks = sample.segments.values().next().map_or(0, Vec::len);
    let consistent = !sample.segments.is_empty()
        && sample.features.keys().all(|m| sample.segments.get(m).is_some_and(|s| s.len() == n_blocks));
    let blocks: Option<BTreeMap<Modality, Vec<Vec<f64>>>> = consistent
        .then(|| {
            sample
                .features
                .iter()
                .map(|(m, seq)| split_blocks(seq, &sample.segments[m]).map(|b| (*m, b)))
                .collect()
        })
        .flatten();
    let Some(blocks) = blocks else {
        return (vec![sample.clone()], true);
    };
    let order: Vec<usize> = (0..n_blocks).collect();
    let aug = augment_shuffle_responses(&order, times, seed);
    if aug.too_few_blocks {
        return (vec![sample.clone()], true);
    }
    let mut out = vec![sample.clone()];
    for (k, perm) in aug.samples.iter().enumerate().skip(1) {
        let mut features = BTreeMap::new();
        let mut segments = BTreeMap::new();
        for (m, seq) in &sample.features {
            let data: Vec<f64> = perm.iter().flat_map(|&b| blocks[m][b].iter().copied()).collect();
            features.insert(*m, Tensor::matrix(seq.rows(), seq.cols(), data).expect("same size"));
            segments.insert(*m, perm.iter().map(|&b| sample.segments[m][b]).collect());
        }
        out.push(Sample {
            subject_id: augmented_id(&sample.subject_id, k),
            features,
            segments,
            label: sample.label,
        });
    }
    (out, false)
}
