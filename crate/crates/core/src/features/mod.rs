//! Input representations: audio spectral features, emotion-vector validation
//! and saliency metrics for the gaze modality.

pub mod audio;
pub mod emotion;
pub mod saliency;
pub mod wav;

pub use audio::{
    audio_feature_names, audio_features, chroma, mel_filterbank, mel_spectrogram, mfcc, stft, AudioFeatureConfig,
    Spectrogram,
};
pub use emotion::{load_emotion_features, parse_emotion_csv, EMOTIONS};
pub use saliency::{saliency_metrics, SaliencyMetrics, SaliencyPair, METRIC_NAMES};
pub use wav::{decode_wav, read_wav, resample_nearest, Audio};
