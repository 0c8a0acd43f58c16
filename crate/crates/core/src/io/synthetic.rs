//! Seeded synthetic cohorts for tests and demos.
//!
//! - `separable`: three classes, every modality carries a class-specific
//!   offset, so any modality alone suffices.
//! - `xor`: two modalities whose signs are each independent of the label;
//!   the label is whether the signs differ. Only a model that combines
//!   modalities before classifying can learn it.
//! - `protocol`: a larger three-class cohort for split bookkeeping.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::csv_matrix::write_matrix_csv;
use crate::io::manifest::{DatasetManifest, ModalitySource, SubjectRecord};
use crate::model::{Modality, Sample};
use crate::tensor::Tensor;
use crate::train::{phq9_to_class, Task};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CohortKind {
    Separable,
    Xor,
    Protocol,
}

impl std::str::FromStr for CohortKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "separable" => Ok(CohortKind::Separable),
            "xor" => Ok(CohortKind::Xor),
            "protocol" => Ok(CohortKind::Protocol),
            other => Err(Error::Config(format!("unknown cohort kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: CohortKind,
    pub n_subjects: usize,
    /// Rows per modality; split into blocks of `block_len`.
    pub seq_len: usize,
    pub block_len: usize,
    pub width: usize,
    /// Half-width of the uniform noise added to every entry.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(kind: CohortKind, seed: u64) -> Self {
        let n_subjects = match kind {
            CohortKind::Separable => 30,
            CohortKind::Xor => 40,
            CohortKind::Protocol => 103,
        };
        SyntheticSpec {
            kind,
            n_subjects,
            seq_len: 8,
            block_len: 2,
            width: 3,
            noise: 0.3,
            seed,
        }
    }

    pub fn task(&self) -> Task {
        match self.kind {
            CohortKind::Xor => Task::Binary,
            _ => Task::ThreeClass,
        }
    }

    pub fn modalities(&self) -> Vec<Modality> {
        match self.kind {
            CohortKind::Xor => vec![Modality::Audio, Modality::Video],
            _ => Modality::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSubject {
    pub subject_id: String,
    pub phq9: u32,
    pub features: BTreeMap<Modality, Tensor>,
    pub segments: BTreeMap<Modality, Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCohort {
    pub spec: SyntheticSpec,
    pub subjects: Vec<SyntheticSubject>,
}

/// Seeded PHQ-9 score inside a three-class band.
fn score_in_class(rng: &mut ChaCha8Rng, class: usize) -> u32 {
    match class {
        0 => rng.gen_range(0..=4),
        1 => rng.gen_range(5..=14),
        _ => rng.gen_range(15..=27),
    }
}

pub fn make_cohort(spec: &SyntheticSpec) -> Result<SyntheticCohort> {
    if spec.n_subjects < 2 || spec.width == 0 || spec.block_len == 0 || spec.seq_len < spec.block_len {
        return Err(Error::Config("synthetic cohort needs >= 2 subjects and positive sizes".into()));
    }
    if !spec.seq_len.is_multiple_of(spec.block_len) {
        return Err(Error::Config("seq_len must be a multiple of block_len".into()));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::Config("noise must be finite and nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_subjects;
    // balanced group assignment, then shuffled
    let mut groups: Vec<usize> = match spec.kind {
        CohortKind::Xor => (0..n).map(|i| i % 4).collect(),
        _ => (0..n).map(|i| i % 3).collect(),
    };
    groups.shuffle(&mut rng);
    let blocks = vec![spec.block_len; spec.seq_len / spec.block_len];
    let mut subjects = Vec::with_capacity(n);
    for (i, &g) in groups.iter().enumerate() {
        let (class, offsets): (usize, Vec<Vec<f64>>) = match spec.kind {
            CohortKind::Xor => {
                let (sa, sv) = (if g & 1 == 0 { 1.0 } else { -1.0 }, if g & 2 == 0 { 1.0 } else { -1.0 });
                let positive = usize::from(sa != sv);
                (2 * positive, vec![vec![sa; spec.width], vec![sv; spec.width]])
            }
            _ => {
                let mut o = vec![0.0; spec.width];
                o[g % spec.width] = 1.5;
                if spec.width < 3 {
                    o[0] += g as f64;
                }
                (g, vec![o; 3])
            }
        };
        let phq9 = match (spec.kind, class) {
            // binary negatives stay in 0..=4, positives anywhere above
            (CohortKind::Xor, 0) => score_in_class(&mut rng, 0),
            (CohortKind::Xor, _) => {
                let band = 1 + rng.gen_range(0..2);
                score_in_class(&mut rng, band)
            }
            (_, c) => score_in_class(&mut rng, c),
        };
        let mut features = BTreeMap::new();
        let mut segments = BTreeMap::new();
        for (m, off) in spec.modalities().into_iter().zip(&offsets) {
            let data = (0..spec.seq_len)
                .flat_map(|_| off.iter().map(|&o| o + spec.noise * (2.0 * rng.gen::<f64>() - 1.0)).collect::<Vec<_>>())
                .collect();
            features.insert(m, Tensor::matrix(spec.seq_len, spec.width, data)?);
            segments.insert(m, blocks.clone());
        }
        subjects.push(SyntheticSubject {
            subject_id: format!("syn{i:03}"),
            phq9,
            features,
            segments,
        });
    }
    Ok(SyntheticCohort {
        spec: spec.clone(),
        subjects,
    })
}

impl SyntheticCohort {
    pub fn samples(&self) -> Result<Vec<Sample>> {
        let task = self.spec.task();
        self.subjects
            .iter()
            .map(|s| {
                Ok(Sample {
                    subject_id: s.subject_id.clone(),
                    features: s.features.clone(),
                    segments: s.segments.clone(),
                    label: phq9_to_class(s.phq9, task)?,
                })
            })
            .collect()
    }

    pub fn header(&self) -> Vec<String> {
        (0..self.spec.width).map(|i| format!("f{i}")).collect()
    }

    /// Writes one CSV per subject and modality plus `manifest.json`;
    /// returns the manifest path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let header = self.header();
        let mut manifest = DatasetManifest {
            name: format!("synthetic-{:?}-{}", self.spec.kind, self.spec.seed).to_lowercase(),
            subjects: Vec::with_capacity(self.subjects.len()),
        };
        for s in &self.subjects {
            let mut r = SubjectRecord {
                subject_id: s.subject_id.clone(),
                phq9: s.phq9,
                audio: None,
                video: None,
                gaze: None,
                segments: s.segments.clone(),
            };
            for (m, t) in &s.features {
                let file = format!("{}.{m}.csv", s.subject_id);
                write_matrix_csv(&dir.join(&file), &header, t)?;
                r.set_source(*m, Some(ModalitySource::Features { path: file.into() }));
            }
            manifest.subjects.push(r);
        }
        let path = dir.join("manifest.json");
        std::fs::write(&path, manifest.to_json()?)?;
        std::fs::write(dir.join("synthetic.json"), serde_json::to_string_pretty(&self.spec)?)?;
        Ok(path)
    }
}
