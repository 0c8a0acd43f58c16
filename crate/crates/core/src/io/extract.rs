//! Turns manifest records into model samples, and writes extracted features
//! back out as CSVs with a manifest that points at them.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    audio_feature_names, audio_features, parse_emotion_csv, read_wav, resample_nearest, saliency_metrics,
    AudioFeatureConfig, SaliencyPair, EMOTIONS, METRIC_NAMES,
};
use crate::io::csv_matrix::{read_matrix_csv, write_matrix_csv};
use crate::io::manifest::{DatasetManifest, ModalitySource, SubjectRecord};
use crate::model::{Modality, Sample};
use crate::tensor::Tensor;
use crate::train::{phq9_to_class, Task};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub audio: AudioFeatureConfig,
    /// Seed of the sampled saliency AUCs.
    pub saliency_seed: u64,
}

/// Feature matrix plus column names.
#[derive(Clone, Debug, PartialEq)]
pub struct Extracted {
    pub header: Vec<String>,
    pub data: Tensor,
}

fn map(path: &Path) -> Result<Tensor> {
    read_matrix_csv(path)?.to_tensor()
}

fn gaze_rows(pairs: &[(Tensor, Tensor)], baseline: Option<&Tensor>, seed: u64) -> Result<Tensor> {
    let mut rows = Vec::with_capacity(pairs.len());
    for (i, (fix, sal)) in pairs.iter().enumerate() {
        let pair = SaliencyPair::new(fix.clone(), sal.clone()).map_err(|e| Error::Row {
            row: i,
            reason: format!("map pair: {e}"),
        })?;
        let others: Vec<Tensor> = pairs
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, (f, _))| f.clone())
            .collect();
        let m = saliency_metrics(&pair, Some(&others), baseline, seed.wrapping_add(i as u64));
        let missing = m.missing();
        if !missing.is_empty() {
            return Err(Error::Row {
                row: i,
                reason: format!("undefined saliency metrics: {}", missing.join(", ")),
            });
        }
        rows.push(m.values().iter().map(|v| v.expect("checked above")).collect());
    }
    Tensor::from_rows(&rows)
}

/// Loads or computes one modality's feature matrix.
pub fn extract_source(src: &ModalitySource, cfg: &FeatureConfig) -> Result<Extracted> {
    match src {
        ModalitySource::Wav { path } => {
            let audio = read_wav(path)?;
            let signal = resample_nearest(&audio.samples, audio.sample_rate, cfg.audio.sample_rate);
            Ok(Extracted {
                header: audio_feature_names(&cfg.audio),
                data: audio_features(&signal, &cfg.audio)?,
            })
        }
        ModalitySource::Features { path } => {
            let m = read_matrix_csv(path)?;
            if m.rows.is_empty() {
                return Err(Error::invalid(format!("{} has no data rows", path.display())));
            }
            let data = m.to_tensor()?;
            Ok(Extracted { header: m.header, data })
        }
        ModalitySource::Emotion { path } => Ok(Extracted {
            header: EMOTIONS.iter().map(|s| s.to_string()).collect(),
            data: parse_emotion_csv(&std::fs::read_to_string(path)?)?,
        }),
        ModalitySource::SaliencyPairs { pairs, baseline } => {
            let loaded = pairs
                .iter()
                .map(|p| Ok((map(&p.fixation)?, map(&p.saliency)?)))
                .collect::<Result<Vec<_>>>()?;
            let base = baseline.as_deref().map(map).transpose()?;
            Ok(Extracted {
                header: METRIC_NAMES.iter().map(|s| s.to_string()).collect(),
                data: gaze_rows(&loaded, base.as_ref(), cfg.saliency_seed)?,
            })
        }
    }
}

fn subject_err(id: &str, m: Modality, e: Error) -> Error {
    Error::Subject {
        subject: id.to_string(),
        reason: format!("{m}: {e}"),
    }
}

/// Extracts `modalities` of one subject. Missing modalities are an error;
/// nothing is imputed.
pub fn extract_subject(
    record: &SubjectRecord,
    modalities: &[Modality],
    cfg: &FeatureConfig,
    task: Task,
) -> Result<(Sample, BTreeMap<Modality, Vec<String>>)> {
    let mut features = BTreeMap::new();
    let mut headers = BTreeMap::new();
    for &m in modalities {
        let src = record.source(m).ok_or_else(|| Error::Subject {
            subject: record.subject_id.clone(),
            reason: format!("no {m} source"),
        })?;
        let ex = extract_source(src, cfg).map_err(|e| subject_err(&record.subject_id, m, e))?;
        if let Some(seg) = record.segments.get(&m) {
            let total: usize = seg.iter().sum();
            if total != ex.data.rows() {
                return Err(subject_err(
                    &record.subject_id,
                    m,
                    Error::invalid(format!("segments cover {total} rows, features have {}", ex.data.rows())),
                ));
            }
        }
        headers.insert(m, ex.header);
        features.insert(m, ex.data);
    }
    let segments = record
        .segments
        .iter()
        .filter(|(m, _)| modalities.contains(m))
        .map(|(m, s)| (*m, s.clone()))
        .collect();
    let label = phq9_to_class(record.phq9, task).map_err(|e| Error::Subject {
        subject: record.subject_id.clone(),
        reason: e.to_string(),
    })?;
    Ok((
        Sample {
            subject_id: record.subject_id.clone(),
            features,
            segments,
            label,
        },
        headers,
    ))
}

/// Extracted dataset with the per-modality column names, which must agree
/// across subjects.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub headers: BTreeMap<Modality, Vec<String>>,
}

impl Dataset {
    pub fn width(&self, m: Modality) -> Option<usize> {
        self.headers.get(&m).map(Vec::len)
    }

    pub fn max_rows(&self, m: Modality) -> usize {
        self.samples.iter().filter_map(|s| s.features.get(&m)).map(Tensor::rows).max().unwrap_or(0)
    }

    pub fn ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.subject_id.clone()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }
}

/// Extracts every subject (in parallel; output order and values do not
/// depend on scheduling).
pub fn extract_dataset(manifest: &DatasetManifest, modalities: &[Modality], cfg: &FeatureConfig, task: Task) -> Result<Dataset> {
    if modalities.is_empty() {
        return Err(Error::Config("no modalities selected".into()));
    }
    manifest.require(modalities)?;
    let extracted = manifest
        .subjects
        .par_iter()
        .map(|r| extract_subject(r, modalities, cfg, task))
        .collect::<Result<Vec<_>>>()?;
    let mut headers: BTreeMap<Modality, Vec<String>> = BTreeMap::new();
    let mut samples = Vec::with_capacity(extracted.len());
    for (sample, h) in extracted {
        for (m, cols) in h {
            match headers.get(&m) {
                Some(prev) if *prev != cols => {
                    return Err(Error::Subject {
                        subject: sample.subject_id.clone(),
                        reason: format!("{m} columns differ from earlier subjects"),
                    })
                }
                Some(_) => {}
                None => {
                    headers.insert(m, cols);
                }
            }
        }
        samples.push(sample);
    }
    Ok(Dataset { samples, headers })
}

/// Writes `{dir}/{subject}.{modality}.csv` for every sample and a
/// `manifest.json` referencing them, keeping scores and segments.
pub fn write_features(dir: &Path, manifest: &DatasetManifest, data: &Dataset) -> Result<DatasetManifest> {
    std::fs::create_dir_all(dir)?;
    let mut out = DatasetManifest {
        name: format!("{}-features", manifest.name),
        subjects: Vec::with_capacity(data.samples.len()),
    };
    for (record, sample) in manifest.subjects.iter().zip(&data.samples) {
        let mut r = SubjectRecord {
            subject_id: record.subject_id.clone(),
            phq9: record.phq9,
            audio: None,
            video: None,
            gaze: None,
            segments: sample.segments.clone(),
        };
        for (m, t) in &sample.features {
            let file = format!("{}.{m}.csv", record.subject_id);
            write_matrix_csv(&dir.join(&file), &data.headers[m], t)?;
            r.set_source(*m, Some(ModalitySource::Features { path: file.into() }));
        }
        out.subjects.push(r);
    }
    std::fs::write(dir.join("manifest.json"), out.to_json()?)?;
    Ok(out)
}
