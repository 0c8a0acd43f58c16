//! STFT, mel spectrogram, chroma and MFCC.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Floor applied to mel energies before the log.
pub const LOG_FLOOR: f64 = 1e-10;

/// Bins below this frequency are ignored by [`chroma`].
pub const CHROMA_CUTOFF_HZ: f64 = 30.0;

/// Reference tuning for pitch classes.
pub const A4_HZ: f64 = 440.0;

pub const PITCH_CLASSES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AudioFeatureConfig {
    pub sample_rate: u32,
    pub window: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
}

impl Default for AudioFeatureConfig {
    fn default() -> Self {
        AudioFeatureConfig {
            sample_rate: 16_000,
            window: 512,
            hop: 256,
            n_mels: 64,
            n_mfcc: 20,
        }
    }
}

/// Complex STFT frames, `n_frames x (window/2 + 1)`.
#[derive(Clone, Debug)]
pub struct Spectrogram {
    pub sample_rate: u32,
    pub window: usize,
    pub hop: usize,
    n_frames: usize,
    bins: Vec<Complex64>,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.window / 2 + 1
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        let nb = self.n_bins();
        &self.bins[t * nb..(t + 1) * nb]
    }

    /// Center frequency of bin `k` in Hz.
    pub fn bin_hz(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate as f64 / self.window as f64
    }

    pub fn magnitude(&self) -> Tensor {
        Tensor::matrix(self.n_frames, self.n_bins(), self.bins.iter().map(|c| c.norm()).collect())
            .expect("nonempty spectrogram")
    }

    pub fn power(&self) -> Tensor {
        Tensor::matrix(self.n_frames, self.n_bins(), self.bins.iter().map(|c| c.norm_sqr()).collect())
            .expect("nonempty spectrogram")
    }
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

pub fn stft(signal: &[f64], sample_rate: u32, window: usize, hop: usize) -> Result<Spectrogram> {
    if window < 2 || !window.is_power_of_two() {
        return Err(Error::invalid(format!("window {window} must be a power of two >= 2")));
    }
    if hop == 0 || hop > window {
        return Err(Error::invalid(format!("hop {hop} must lie in 1..={window}")));
    }
    if sample_rate == 0 {
        return Err(Error::invalid("sample rate must be positive"));
    }
    if signal.len() < window {
        return Err(Error::invalid(format!(
            "signal of {} samples is shorter than the {window}-sample window",
            signal.len()
        )));
    }
    let n_frames = 1 + (signal.len() - window) / hop;
    let nb = window / 2 + 1;
    let w = hann(window);
    let fft = FftPlanner::new().plan_fft_forward(window);
    let mut buf = vec![Complex64::new(0.0, 0.0); window];
    let mut bins = Vec::with_capacity(n_frames * nb);
    for t in 0..n_frames {
        let frame = &signal[t * hop..t * hop + window];
        for ((b, &x), &wi) in buf.iter_mut().zip(frame).zip(&w) {
            *b = Complex64::new(x * wi, 0.0);
        }
        fft.process(&mut buf);
        bins.extend_from_slice(&buf[..nb]);
    }
    Ok(Spectrogram {
        sample_rate,
        window,
        hop,
        n_frames,
        bins,
    })
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular HTK-mel filterbank, `n_mels x (window/2 + 1)`, spanning
/// 0 Hz to Nyquist. Band `m` rises from edge `m` to edge `m+1` and falls to
/// edge `m+2`; peaks have weight one.
pub fn mel_filterbank(n_mels: usize, window: usize, sample_rate: u32) -> Result<Tensor> {
    if n_mels == 0 {
        return Err(Error::invalid("n_mels must be positive"));
    }
    let nb = window / 2 + 1;
    let top = hz_to_mel(sample_rate as f64 / 2.0);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    let mut fb = Tensor::zeros(&[n_mels, nb]);
    for m in 0..n_mels {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..nb {
            let f = k as f64 * sample_rate as f64 / window as f64;
            let w = if f > lo && f <= mid {
                (f - lo) / (mid - lo)
            } else if f > mid && f < hi {
                (hi - f) / (hi - mid)
            } else {
                0.0
            };
            fb.set(m, k, w);
        }
    }
    Ok(fb)
}

/// `M(t, m) = Σ_f w_m(f) |X(t, f)|²`, `n_frames x n_mels`.
pub fn mel_spectrogram(spec: &Spectrogram, n_mels: usize) -> Result<Tensor> {
    let fb = mel_filterbank(n_mels, spec.window, spec.sample_rate)?;
    spec.power().matmul(&fb.transpose()?)
}

/// Pitch class of a frequency, `0 = C`.
pub fn pitch_class(hz: f64) -> usize {
    let semis_from_a = (12.0 * (hz / A4_HZ).log2()).round() as i64;
    (semis_from_a + 9).rem_euclid(12) as usize
}

/// `C(t, k) = Σ_{f ∈ F_k} |X(t, f)|` over bins at or above the cutoff.
pub fn chroma(spec: &Spectrogram) -> Tensor {
    let mut out = Tensor::zeros(&[spec.n_frames(), 12]);
    let classes: Vec<Option<usize>> = (0..spec.n_bins())
        .map(|k| {
            let f = spec.bin_hz(k);
            (f >= CHROMA_CUTOFF_HZ).then(|| pitch_class(f))
        })
        .collect();
    for t in 0..spec.n_frames() {
        for (x, class) in spec.frame(t).iter().zip(&classes) {
            if let Some(c) = *class {
                out.set(t, c, out.get(t, c) + x.norm());
            }
        }
    }
    out
}

/// `MFCC_n(t) = Σ_m log(max(M(t,m), floor)) cos(π n (m + 0.5) / M)` for
/// `n < n_coeffs`.
pub fn mfcc(mel: &Tensor, n_coeffs: usize) -> Result<Tensor> {
    let (frames, n_mels) = mel.dims2()?;
    if n_coeffs == 0 || n_coeffs > n_mels {
        return Err(Error::invalid(format!("n_coeffs {n_coeffs} must lie in 1..={n_mels}")));
    }
    let basis: Vec<f64> = (0..n_coeffs)
        .flat_map(|n| (0..n_mels).map(move |m| (PI * n as f64 / n_mels as f64 * (m as f64 + 0.5)).cos()))
        .collect();
    let mut out = Tensor::zeros(&[frames, n_coeffs]);
    for t in 0..frames {
        let logs: Vec<f64> = mel.row(t).iter().map(|&v| v.max(LOG_FLOOR).ln()).collect();
        for n in 0..n_coeffs {
            let b = &basis[n * n_mels..(n + 1) * n_mels];
            out.set(t, n, logs.iter().zip(b).map(|(l, c)| l * c).sum());
        }
    }
    Ok(out)
}

/// Column names of [`audio_features`].
pub fn audio_feature_names(cfg: &AudioFeatureConfig) -> Vec<String> {
    (0..cfg.n_mfcc)
        .map(|i| format!("mfcc_{i}"))
        .chain(PITCH_CLASSES.iter().map(|c| format!("chroma_{c}")))
        .chain((0..cfg.n_mels).map(|i| format!("logmel_{i}")))
        .collect()
}

/// Per-frame `[MFCC | chroma | log-mel]` rows.
pub fn audio_features(signal: &[f64], cfg: &AudioFeatureConfig) -> Result<Tensor> {
    let spec = stft(signal, cfg.sample_rate, cfg.window, cfg.hop)?;
    let mel = mel_spectrogram(&spec, cfg.n_mels)?;
    let mf = mfcc(&mel, cfg.n_mfcc)?;
    let ch = chroma(&spec);
    let width = cfg.n_mfcc + 12 + cfg.n_mels;
    let mut data = Vec::with_capacity(spec.n_frames() * width);
    for t in 0..spec.n_frames() {
        data.extend_from_slice(mf.row(t));
        data.extend_from_slice(ch.row(t));
        data.extend(mel.row(t).iter().map(|&v| v.max(LOG_FLOOR).ln()));
    }
    Tensor::matrix(spec.n_frames(), width, data)
}
