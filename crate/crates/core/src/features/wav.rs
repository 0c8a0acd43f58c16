//! Mono PCM WAV ingestion.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Audio {
    /// Samples scaled to `[-1, 1)`.
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

/// Decodes a mono 8- or 16-bit integer PCM WAV.
pub fn decode_wav(bytes: &[u8]) -> Result<Audio> {
    let mut reader = hound::WavReader::new(Cursor::new(bytes))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::invalid(format!("expected mono audio, found {} channels", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::invalid("only integer PCM is supported"));
    }
    if spec.sample_rate == 0 {
        return Err(Error::invalid("sample rate is zero"));
    }
    let samples = match spec.bits_per_sample {
        8 => reader
            .samples::<i8>()
            .map(|s| s.map(|v| v as f64 / 128.0))
            .collect::<std::result::Result<Vec<_>, _>>()?,
        16 => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<Vec<_>, _>>()?,
        bits => return Err(Error::invalid(format!("unsupported bit depth {bits}"))),
    };
    Ok(Audio {
        samples,
        sample_rate: spec.sample_rate,
    })
}

pub fn read_wav(path: &Path) -> Result<Audio> {
    decode_wav(&std::fs::read(path)?)
}

/// Nearest-neighbour resampling. Cheap and aliasing-prone; adequate for
/// feature extraction at nearby rates, not for listening.
pub fn resample_nearest(signal: &[f64], from: u32, to: u32) -> Vec<f64> {
    if from == to || signal.is_empty() {
        return signal.to_vec();
    }
    let ratio = from as f64 / to as f64;
    let out_len = ((signal.len() as f64) / ratio).round().max(1.0) as usize;
    (0..out_len)
        .map(|i| signal[((i as f64 * ratio).round() as usize).min(signal.len() - 1)])
        .collect()
}

/// Writes a mono 16-bit WAV; samples are clipped to `[-1, 1]`.
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for &s in samples {
        w.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)?;
    }
    w.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode(bits: u16, channels: u16, samples: &[i32]) -> Vec<u8> {
        let spec = hound::WavSpec {
            channels,
            sample_rate: 8000,
            bits_per_sample: bits,
            sample_format: hound::SampleFormat::Int,
        };
        let mut buf = Cursor::new(Vec::new());
        {
            let mut w = hound::WavWriter::new(&mut buf, spec).unwrap();
            for &s in samples {
                match bits {
                    8 => w.write_sample(s as i8).unwrap(),
                    16 => w.write_sample(s as i16).unwrap(),
                    _ => w.write_sample(s).unwrap(),
                }
            }
            w.finalize().unwrap();
        }
        buf.into_inner()
    }

    #[test]
    fn decodes_16_and_8_bit() {
        let a = decode_wav(&encode(16, 1, &[0, 16384, -32768])).unwrap();
        assert_eq!(a.samples, vec![0.0, 0.5, -1.0]);
        assert_eq!(a.sample_rate, 8000);
        let b = decode_wav(&encode(8, 1, &[0, 64, -128])).unwrap();
        assert_eq!(b.samples, vec![0.0, 0.5, -1.0]);
    }

    #[test]
    fn rejects_stereo_and_other_depths() {
        assert!(decode_wav(&encode(16, 2, &[0, 0])).is_err());
        assert!(decode_wav(&encode(24, 1, &[0])).is_err());
        assert!(decode_wav(b"RIFF").is_err());
    }

    #[test]
    fn nearest_resampling() {
        let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
        assert_eq!(resample_nearest(&x, 8, 4), vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(resample_nearest(&x, 4, 8).len(), 16);
        assert_eq!(resample_nearest(&x, 8, 8), x);
    }
}
