//! Mel-cepstral distortion between DTW-aligned cepstral sequences.

use std::f64::consts::{LN_10, PI, SQRT_2};

use crate::audio::Waveform;
use crate::config::VocoderConfig;
use crate::error::{Error, Result};
use crate::spectral::{MelAnalyzer, MelSpectrogram};

use super::dtw::dtw_align;

/// Cepstral coefficients kept per frame (c1..c13; c0 is dropped).
pub const MCD_COEFFS: usize = 13;

/// `(10 / ln 10) * sqrt(2)`.
pub const MCD_SCALE: f64 = 10.0 / LN_10 * SQRT_2;

/// Orthonormal DCT-II coefficients `1..=count` of one log-mel frame.
pub fn mel_cepstrum(frame: &[f64], count: usize) -> Vec<f64> {
    let n = frame.len();
    let scale = (2.0 / n as f64).sqrt();
    (1..=count.min(n.saturating_sub(1)))
        .map(|k| {
            scale
                * frame
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| v * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                    .sum::<f64>()
        })
        .collect()
}

pub fn cepstral_frames(mel: &MelSpectrogram) -> Vec<Vec<f64>> {
    (0..mel.frames)
        .map(|t| mel_cepstrum(&mel.frame(t), MCD_COEFFS))
        .collect()
}

/// MCD on precomputed log-mel spectrograms.
pub fn mcd_from_mels(a: &MelSpectrogram, b: &MelSpectrogram) -> Result<f64> {
    if a.mels != b.mels {
        return Err(Error::Shape(format!("{} vs {} mel bands", a.mels, b.mels)));
    }
    let al = dtw_align(&cepstral_frames(a), &cepstral_frames(b))?;
    Ok(MCD_SCALE * al.mean_cost())
}

pub fn mcd(reference: &Waveform, generated: &Waveform, cfg: &VocoderConfig) -> Result<f64> {
    if reference.is_empty() || generated.is_empty() {
        return Err(Error::Empty("audio"));
    }
    let analyzer = MelAnalyzer::new(cfg)?;
    mcd_from_mels(&analyzer.analyze(reference)?, &analyzer.analyze(generated)?)
}
