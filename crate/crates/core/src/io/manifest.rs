//! Dataset manifests: one JSON file listing subjects, scores and the files
//! that hold each modality.
//!
//! ```json
//! {
//!   "name": "cohort",
//!   "subjects": [
//!     {
//!       "subject_id": "s01",
//!       "phq9": 12,
//!       "audio": { "kind": "wav", "path": "s01.wav" },
//!       "video": { "kind": "emotion", "path": "s01_emotion.csv" },
//!       "gaze": { "kind": "saliency_pairs",
//!                 "pairs": [{ "fixation": "f1.csv", "saliency": "s1.csv" }] },
//!       "segments": { "audio": [40, 38] }
//!     }
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Modality;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapPair {
    pub fixation: PathBuf,
    pub saliency: PathBuf,
}

/// Where one modality of one subject comes from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModalitySource {
    /// Mono PCM WAV, turned into audio features on extraction.
    Wav { path: PathBuf },
    /// Precomputed headered feature CSV, used as is.
    Features { path: PathBuf },
    /// Per-frame emotion scores in the canonical seven columns.
    Emotion { path: PathBuf },
    /// Fixation/saliency map pairs, one feature row of eight metrics per
    /// pair. `baseline` enables information gain.
    SaliencyPairs {
        pairs: Vec<MapPair>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        baseline: Option<PathBuf>,
    },
}

impl ModalitySource {
    pub fn paths(&self) -> Vec<&Path> {
        match self {
            ModalitySource::Wav { path } | ModalitySource::Features { path } | ModalitySource::Emotion { path } => {
                vec![path]
            }
            ModalitySource::SaliencyPairs { pairs, baseline } => pairs
                .iter()
                .flat_map(|p| [p.fixation.as_path(), p.saliency.as_path()])
                .chain(baseline.as_deref())
                .collect(),
        }
    }

    fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            ModalitySource::Wav { path } | ModalitySource::Features { path } | ModalitySource::Emotion { path } => {
                vec![path]
            }
            ModalitySource::SaliencyPairs { pairs, baseline } => pairs
                .iter_mut()
                .flat_map(|p| [&mut p.fixation, &mut p.saliency])
                .chain(baseline.as_mut())
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub phq9: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<ModalitySource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video: Option<ModalitySource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze: Option<ModalitySource>,
    /// Response-block lengths in feature rows, per modality.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub segments: BTreeMap<Modality, Vec<usize>>,
}

impl SubjectRecord {
    pub fn source(&self, m: Modality) -> Option<&ModalitySource> {
        match m {
            Modality::Audio => self.audio.as_ref(),
            Modality::Video => self.video.as_ref(),
            Modality::Gaze => self.gaze.as_ref(),
        }
    }

    pub fn set_source(&mut self, m: Modality, src: Option<ModalitySource>) {
        match m {
            Modality::Audio => self.audio = src,
            Modality::Video => self.video = src,
            Modality::Gaze => self.gaze = src,
        }
    }

    pub fn available(&self) -> Vec<Modality> {
        Modality::ALL.into_iter().filter(|&m| self.source(m).is_some()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub subjects: Vec<SubjectRecord>,
}

impl DatasetManifest {
    /// Parses and checks everything that does not touch the filesystem:
    /// a nonempty subject list, unique ids, scores in `0..=27`, at least one
    /// modality per subject and no zero-length segments.
    pub fn parse(json: &str) -> Result<Self> {
        let m: DatasetManifest = serde_json::from_str(json).map_err(|e| Error::Manifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.subjects.is_empty() {
            return Err(Error::Manifest("subject list is empty".into()));
        }
        let mut seen = HashSet::new();
        for (i, s) in self.subjects.iter().enumerate() {
            let bad = |reason: String| Error::Manifest(format!("subject #{i} ({}): {reason}", s.subject_id));
            if s.subject_id.trim().is_empty() {
                return Err(bad("empty subject id".into()));
            }
            if s.subject_id.contains("#aug") {
                return Err(bad("ids may not contain the reserved marker \"#aug\"".into()));
            }
            if !seen.insert(s.subject_id.as_str()) {
                return Err(bad("duplicate subject id".into()));
            }
            if s.phq9 > 27 {
                return Err(bad(format!("PHQ-9 score {} outside 0..=27", s.phq9)));
            }
            if s.available().is_empty() {
                return Err(bad("no modality sources".into()));
            }
            if let Some(ModalitySource::SaliencyPairs { pairs, .. }) = &s.gaze {
                if pairs.is_empty() {
                    return Err(bad("saliency_pairs needs at least one pair".into()));
                }
            }
            for (m, seg) in &s.segments {
                if s.source(*m).is_none() {
                    return Err(bad(format!("segments given for absent modality {m}")));
                }
                if seg.is_empty() || seg.contains(&0) {
                    return Err(bad(format!("{m} segments must be nonempty positive lengths")));
                }
            }
        }
        Ok(())
    }

    /// Subjects missing any of `modalities`, by id.
    pub fn missing(&self, modalities: &[Modality]) -> Vec<(String, Modality)> {
        self.subjects
            .iter()
            .flat_map(|s| {
                modalities
                    .iter()
                    .filter(|m| s.source(**m).is_none())
                    .map(|m| (s.subject_id.clone(), *m))
            })
            .collect()
    }

    /// Fails on the first subject lacking a required modality.
    pub fn require(&self, modalities: &[Modality]) -> Result<()> {
        match self.missing(modalities).first() {
            Some((id, m)) => Err(Error::Manifest(format!("subject {id}: no {m} source"))),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn resolve(&mut self, base: &Path) {
        for s in &mut self.subjects {
            for m in Modality::ALL {
                let src = match m {
                    Modality::Audio => s.audio.as_mut(),
                    Modality::Video => s.video.as_mut(),
                    Modality::Gaze => s.gaze.as_mut(),
                };
                if let Some(src) = src {
                    for p in src.paths_mut() {
                        if p.is_relative() {
                            *p = base.join(&*p);
                        }
                    }
                }
            }
        }
    }
}

/// Reads, validates and resolves a manifest, then checks that every
/// referenced file exists.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Manifest(format!("cannot read {}: {e}", path.display())))?;
    let mut m = DatasetManifest::parse(&text)?;
    m.resolve(path.parent().unwrap_or(Path::new(".")));
    for s in &m.subjects {
        for mo in Modality::ALL {
            for p in s.source(mo).map(ModalitySource::paths).unwrap_or_default() {
                if !p.is_file() {
                    return Err(Error::Manifest(format!(
                        "subject {}: {mo} file {} does not exist",
                        s.subject_id,
                        p.display()
                    )));
                }
            }
        }
    }
    Ok(m)
}
