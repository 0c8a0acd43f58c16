//! Multi-frequency graph convolutional fusion of audio, video and gaze features.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense tensors and reverse-mode differentiation
//! - [`spectral`]: modality graphs, eigendecomposition and kernel frequency responses
//! - [`model`]: unimodal encoders, the low/high-pass filter-bank block and the classifier
//! - [`features`]: STFT, mel, chroma, MFCC, saliency metrics and emotion-vector ingestion
//! - [`train`]: Adam, cross-validation, metrics, ROC analysis, augmentation and ablation
//! - [`io`]: manifests, CSV/WAV/checkpoint files, experiment runs and reports

pub mod error;
pub mod features;
pub mod io;
pub mod model;
pub mod spectral;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Gradients, Tape, Tensor, Var};
