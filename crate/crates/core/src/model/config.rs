use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Width of every unimodal embedding.
pub const EMBED_DIM: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Audio,
    Video,
    Gaze,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Audio, Modality::Video, Modality::Gaze];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Video => "video",
            Modality::Gaze => "gaze",
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which modalities a run uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModalitySubset {
    #[default]
    Ensemble,
    Audio,
    Video,
    Gaze,
}

impl ModalitySubset {
    pub fn modalities(self) -> Vec<Modality> {
        match self {
            ModalitySubset::Ensemble => Modality::ALL.to_vec(),
            ModalitySubset::Audio => vec![Modality::Audio],
            ModalitySubset::Video => vec![Modality::Video],
            ModalitySubset::Gaze => vec![Modality::Gaze],
        }
    }
}

impl std::str::FromStr for ModalitySubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ensemble" => Ok(ModalitySubset::Ensemble),
            "audio" => Ok(ModalitySubset::Audio),
            "video" => Ok(ModalitySubset::Video),
            "gaze" => Ok(ModalitySubset::Gaze),
            other => Err(Error::Config(format!("unknown modality subset {other:?}"))),
        }
    }
}

/// Per-modality input geometry: feature width `f_i` and padded length `m_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub modality: Modality,
    pub width: usize,
    pub max_len: usize,
}

/// Convolutional temporal encoder shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub channels: usize,
    pub kernel: usize,
    pub pool: usize,
    pub dense_hidden: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            channels: 16,
            kernel: 3,
            pool: 2,
            dense_hidden: 32,
        }
    }
}

impl EncoderConfig {
    /// Shortest padded length the two conv stages and the pool can consume.
    pub fn min_len(&self) -> usize {
        // conv -> pool -> conv must leave at least one step
        self.kernel * self.pool + self.kernel - 1
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    /// Linear regime, for analysis only.
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MffbmConfig {
    /// Balance between the low- and high-pass branches.
    pub phi: f64,
    /// Weights of the `k` low-pass filters; must sum to one.
    pub phi_i: Vec<f64>,
    /// High-pass neighbourhood coefficient.
    pub a: f64,
    pub n_layers: usize,
    pub hidden: usize,
    pub n_classes: usize,
    pub seed: u64,
    pub inputs: Vec<InputSpec>,
    pub encoder: EncoderConfig,
    pub head_hidden: Vec<usize>,
    /// Static edge mask applied to `Ã`; all-ones when absent.
    pub mask: Option<Vec<Vec<f64>>>,
    pub trunk_activation: Activation,
}

impl Default for MffbmConfig {
    fn default() -> Self {
        MffbmConfig {
            phi: 0.5,
            phi_i: vec![0.5, 0.5],
            a: 0.5,
            n_layers: 2,
            hidden: EMBED_DIM,
            n_classes: 3,
            seed: 0,
            inputs: Vec::new(),
            encoder: EncoderConfig::default(),
            head_hidden: vec![64, 32],
            mask: None,
            trunk_activation: Activation::Relu,
        }
    }
}

impl MffbmConfig {
    pub fn k(&self) -> usize {
        self.phi_i.len()
    }

    pub fn modalities(&self) -> Vec<Modality> {
        self.inputs.iter().map(|s| s.modality).collect()
    }

    /// Cross-modal trunk runs only with two or more modalities and `L >= 1`.
    pub fn uses_graph(&self) -> bool {
        self.inputs.len() > 1 && self.n_layers > 0
    }

    /// Uniform `phi_i` over `k` filters.
    pub fn uniform_filters(k: usize) -> Vec<f64> {
        vec![1.0 / k as f64; k]
    }

    pub fn mask_tensor(&self) -> Result<Option<Tensor>> {
        self.mask.as_ref().map(|rows| Tensor::from_rows(rows)).transpose()
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must lie in [0, 1]")))
            }
        };
        unit("phi", self.phi)?;
        unit("a", self.a)?;
        if self.phi_i.is_empty() {
            return Err(Error::Config("need at least one low-pass filter (k >= 1)".into()));
        }
        if self.phi_i.iter().any(|&w| w.is_nan() || w < 0.0) {
            return Err(Error::Config("phi_i must be nonnegative".into()));
        }
        let total: f64 = self.phi_i.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("phi_i must sum to 1, got {total}")));
        }
        if !(2..=3).contains(&self.n_classes) {
            return Err(Error::Config(format!("n_classes must be 2 or 3, got {}", self.n_classes)));
        }
        if self.hidden == 0 || self.head_hidden.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.inputs.is_empty() {
            return Err(Error::Config("no input modalities configured".into()));
        }
        let e = &self.encoder;
        if e.channels == 0 || e.kernel == 0 || e.pool == 0 || e.dense_hidden == 0 {
            return Err(Error::Config("encoder sizes must be positive".into()));
        }
        for (i, spec) in self.inputs.iter().enumerate() {
            if self.inputs[..i].iter().any(|s| s.modality == spec.modality) {
                return Err(Error::Config(format!("modality {} listed twice", spec.modality)));
            }
            if spec.width == 0 {
                return Err(Error::Config(format!("{}: feature width must be positive", spec.modality)));
            }
            if spec.max_len < e.min_len() {
                return Err(Error::Config(format!(
                    "{}: max_len {} below encoder minimum {}",
                    spec.modality,
                    spec.max_len,
                    e.min_len()
                )));
            }
        }
        if let Some(mask) = self.mask_tensor()? {
            let n = self.inputs.len();
            if mask.shape() != [n, n] {
                return Err(Error::Config(format!("mask must be {n}x{n}")));
            }
        }
        Ok(())
    }
}
