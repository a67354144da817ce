//! Mono waveform container, WAV I/O and peak normalization.

use std::io::ErrorKind;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Divisor applied to PCM16 samples on decode.
pub const MAX_WAV_VALUE: f64 = 32768.0;

/// Target peak after [`normalize_peak`].
pub const PEAK_TARGET: f64 = 0.95;

/// A mono sample sequence at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidParameter("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Same sample rate, new samples. Samples must be finite.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, self.sample_rate)
    }

    pub fn require_rate(&self, expected: u32) -> Result<()> {
        if self.sample_rate != expected {
            return Err(Error::SampleRateMismatch {
                expected,
                actual: self.sample_rate,
            });
        }
        Ok(())
    }
}

/// On-disk sample encoding for [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        // hound reports short reads as a custom `Other` error
        hound::Error::IoError(e)
            if e.kind() == ErrorKind::UnexpectedEof
                || e.to_string().contains("enough bytes") =>
        {
            Error::Truncated(format!("{}: {e}", path.display()))
        }
        hound::Error::IoError(e) => Error::io(path, e),
        hound::Error::FormatError(msg) => Error::MalformedWav(format!("{}: {msg}", path.display())),
        hound::Error::Unsupported => {
            Error::UnsupportedEncoding(format!("{}: unsupported wav feature", path.display()))
        }
        hound::Error::TooWide | hound::Error::InvalidSampleFormat => {
            Error::UnsupportedEncoding(format!("{}: {err}", path.display()))
        }
        hound::Error::UnfinishedSample => Error::Truncated(format!("{}: {err}", path.display())),
    }
}

/// Reads a mono PCM16 or IEEE float32 RIFF WAV file.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Multichannel(spec.channels));
    }
    let expected = reader.len() as usize;
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / MAX_WAV_VALUE))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{}: {bits}-bit {fmt:?}",
                path.display()
            )))
        }
    };
    if samples.len() != expected {
        return Err(Error::Truncated(format!(
            "{}: header declares {expected} samples, found {}",
            path.display(),
            samples.len()
        )));
    }
    Waveform::new(samples, spec.sample_rate)
}

/// Quantizes one sample to PCM16: `round(x * 32768)` clamped to the i16 range.
pub fn quantize_pcm16(x: f64) -> i16 {
    (x * MAX_WAV_VALUE)
        .round()
        .clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn write_wav(w: &Waveform, path: impl AsRef<Path>, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    match encoding {
        WavEncoding::Pcm16 => {
            let clipped = w.samples.iter().filter(|s| s.abs() > 1.0).count();
            if clipped > 0 {
                log::warn!(
                    "{}: {clipped} samples outside [-1, 1] clipped for pcm16",
                    path.display()
                );
            }
            for &s in &w.samples {
                writer
                    .write_sample(quantize_pcm16(s))
                    .map_err(|e| map_hound(path, e))?;
            }
        }
        WavEncoding::Float32 => {
            for &s in &w.samples {
                writer
                    .write_sample(s as f32)
                    .map_err(|e| map_hound(path, e))?;
            }
        }
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}

/// Scales to unit peak, then by 0.95. Silence is returned unchanged.
pub fn normalize_peak(w: &Waveform) -> Result<Waveform> {
    if w.is_empty() {
        return Err(Error::Empty("waveform"));
    }
    let peak = w.peak();
    if peak == 0.0 || peak == PEAK_TARGET {
        return Ok(w.clone());
    }
    // Dividing first keeps the peak sample at exactly PEAK_TARGET.
    let samples = w.samples.iter().map(|s| s / peak * PEAK_TARGET).collect();
    w.with_samples(samples)
}
