//! STFT, mel filterbank and log-spectrogram computation.
//!
//! Conventions: periodic Hann window of `win` samples centred inside an
//! `n_fft` frame, reflect padding of `n_fft / 2` on both sides when
//! `center` is set, natural-log magnitudes clamped at [`LOG_CLAMP_FLOOR`].
//! Mel bands use the HTK mel formula with peak-normalised triangles.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::config::{Resolution, VocoderConfig};
use crate::error::{Error, Result};

pub const LOG_CLAMP_FLOOR: f64 = 1e-5;

/// Maps any integer index onto `0..len` by mirror reflection without
/// repeating the edge sample (numpy/torch `reflect`).
pub(crate) fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Periodic Hann window of length `win`.
pub fn hann_window(win: usize) -> Vec<f64> {
    (0..win)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / win as f64).cos())
        .collect()
}

#[derive(Clone)]
pub struct StftPlan {
    n_fft: usize,
    hop: usize,
    win: usize,
    center: bool,
    /// Hann window zero-padded to `n_fft`.
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for StftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StftPlan")
            .field("n_fft", &self.n_fft)
            .field("hop", &self.hop)
            .field("win", &self.win)
            .field("center", &self.center)
            .finish()
    }
}

impl StftPlan {
    pub fn new(n_fft: usize, hop: usize, win: usize, center: bool) -> Result<Self> {
        if hop == 0 || hop > win || win > n_fft {
            return Err(Error::InvalidParameter(format!(
                "stft needs 0 < hop <= win <= n_fft, got n_fft {n_fft} hop {hop} win {win}"
            )));
        }
        let mut window = vec![0.0; n_fft];
        let offset = (n_fft - win) / 2;
        window[offset..offset + win].copy_from_slice(&hann_window(win));
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        Ok(Self {
            n_fft,
            hop,
            win,
            center,
            window,
            fft,
        })
    }

    pub fn from_resolution(r: Resolution) -> Result<Self> {
        Self::new(r.n_fft, r.hop, r.win, true)
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn win(&self) -> usize {
        self.win
    }

    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn num_frames(&self, len: usize) -> Result<usize> {
        if len == 0 {
            return Err(Error::Empty("waveform"));
        }
        if self.center {
            Ok(len / self.hop + 1)
        } else if len < self.n_fft {
            Err(Error::InvalidParameter(format!(
                "uncentred stft needs at least {} samples, got {len}",
                self.n_fft
            )))
        } else {
            Ok((len - self.n_fft) / self.hop + 1)
        }
    }

    /// The windowed analysis frames, each `n_fft` long.
    pub fn frames(&self, samples: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.num_frames(samples.len())?;
        let pad = if self.center { (self.n_fft / 2) as isize } else { 0 };
        Ok((0..n)
            .map(|t| {
                let start = (t * self.hop) as isize - pad;
                (0..self.n_fft)
                    .map(|k| {
                        let idx = reflect_index(start + k as isize, samples.len());
                        samples[idx] * self.window[k]
                    })
                    .collect()
            })
            .collect())
    }

    /// Complex one-sided spectra, one `Vec` of `bins()` values per frame.
    pub fn spectra(&self, samples: &[f64]) -> Result<Vec<Vec<Complex<f64>>>> {
        let frames = self.frames(samples)?;
        let mut scratch = vec![Complex::default(); self.fft.get_inplace_scratch_len()];
        Ok(frames
            .into_iter()
            .map(|frame| {
                let mut buf: Vec<Complex<f64>> =
                    frame.into_iter().map(|v| Complex::new(v, 0.0)).collect();
                self.fft.process_with_scratch(&mut buf, &mut scratch);
                buf.truncate(self.bins());
                buf
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecKind {
    Linear,
    Log,
}

/// Bins × frames matrix, row-major by bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub bins: usize,
    pub frames: usize,
    pub values: Vec<f64>,
    pub kind: SpecKind,
}

impl Spectrogram {
    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.values[bin * self.frames + frame]
    }

    pub fn row(&self, bin: usize) -> &[f64] {
        &self.values[bin * self.frames..(bin + 1) * self.frames]
    }

    pub fn to_log(&self) -> Spectrogram {
        match self.kind {
            SpecKind::Log => self.clone(),
            SpecKind::Linear => Spectrogram {
                values: self.values.iter().map(|&v| clamped_log(v)).collect(),
                kind: SpecKind::Log,
                ..*self
            },
        }
    }

    /// Keeps the first `frames` frames of every bin.
    pub fn trim_frames(&self, frames: usize) -> Spectrogram {
        let frames = frames.min(self.frames);
        let mut values = Vec::with_capacity(self.bins * frames);
        for b in 0..self.bins {
            values.extend_from_slice(&self.row(b)[..frames]);
        }
        Spectrogram {
            frames,
            values,
            ..*self
        }
    }
}

pub fn clamped_log(v: f64) -> f64 {
    v.max(LOG_CLAMP_FLOOR).ln()
}

/// Linear-magnitude STFT.
pub fn stft(w: &Waveform, plan: &StftPlan) -> Result<Spectrogram> {
    stft_samples(w.samples(), plan)
}

pub(crate) fn stft_samples(samples: &[f64], plan: &StftPlan) -> Result<Spectrogram> {
    let spectra = plan.spectra(samples)?;
    let frames = spectra.len();
    let bins = plan.bins();
    let mut values = vec![0.0; bins * frames];
    for (t, spec) in spectra.iter().enumerate() {
        for (b, c) in spec.iter().enumerate() {
            values[b * frames + t] = c.norm();
        }
    }
    Ok(Spectrogram {
        bins,
        frames,
        values,
        kind: SpecKind::Linear,
    })
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Mels × bins weight matrix, row-major by mel band.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub mels: usize,
    pub bins: usize,
    pub weights: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(sample_rate: u32, n_fft: usize, mels: usize, fmin: f64, fmax: f64) -> Result<Self> {
        let nyquist = sample_rate as f64 / 2.0;
        if fmax > nyquist {
            return Err(Error::InvalidParameter(format!(
                "fmax {fmax} exceeds Nyquist {nyquist}"
            )));
        }
        if !(fmin >= 0.0 && fmin < fmax) || mels == 0 || n_fft == 0 {
            return Err(Error::InvalidParameter(format!(
                "bad filterbank: {mels} bands over [{fmin}, {fmax}] Hz, n_fft {n_fft}"
            )));
        }
        let bins = n_fft / 2 + 1;
        let (mel_lo, mel_hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
        let edges: Vec<f64> = (0..mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let mut weights = vec![0.0; mels * bins];
        for m in 0..mels {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..bins {
                let f = k as f64 * bin_hz;
                let rising = (f - lo) / (mid - lo);
                let falling = (hi - f) / (hi - mid);
                weights[m * bins + k] = rising.min(falling).max(0.0);
            }
        }
        Ok(Self {
            mels,
            bins,
            weights,
        })
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.bins..(m + 1) * self.bins]
    }

    /// Projects a linear-magnitude spectrogram onto the mel bands.
    pub fn apply(&self, spec: &Spectrogram) -> Result<Vec<f64>> {
        if spec.bins != self.bins || spec.kind != SpecKind::Linear {
            return Err(Error::Shape(format!(
                "filterbank expects {} linear bins, got {} {:?}",
                self.bins, spec.bins, spec.kind
            )));
        }
        let frames = spec.frames;
        let mut out = vec![0.0; self.mels * frames];
        for m in 0..self.mels {
            let dst = &mut out[m * frames..(m + 1) * frames];
            for (k, &wgt) in self.row(m).iter().enumerate() {
                if wgt == 0.0 {
                    continue;
                }
                for (d, &s) in dst.iter_mut().zip(spec.row(k)) {
                    *d += wgt * s;
                }
            }
        }
        Ok(out)
    }
}

pub fn mel_filterbank(cfg: &VocoderConfig) -> Result<MelFilterbank> {
    MelFilterbank::new(cfg.sampling_rate, cfg.n_fft, cfg.num_mels, cfg.fmin, cfg.fmax)
}

/// Log mel spectrogram, mels × frames, row-major by band.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub mels: usize,
    pub frames: usize,
    pub values: Vec<f64>,
}

impl MelSpectrogram {
    pub fn new(mels: usize, frames: usize, values: Vec<f64>) -> Result<Self> {
        if mels * frames != values.len() {
            return Err(Error::Shape(format!(
                "{mels}x{frames} mel given {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite mel value".into()));
        }
        Ok(Self {
            mels,
            frames,
            values,
        })
    }

    pub fn get(&self, mel: usize, frame: usize) -> f64 {
        self.values[mel * self.frames + frame]
    }

    pub fn row(&self, mel: usize) -> &[f64] {
        &self.values[mel * self.frames..(mel + 1) * self.frames]
    }

    /// Frame `t` as a vector over mel bands.
    pub fn frame(&self, t: usize) -> Vec<f64> {
        (0..self.mels).map(|m| self.get(m, t)).collect()
    }

    pub fn trim_frames(&self, frames: usize) -> MelSpectrogram {
        let frames = frames.min(self.frames);
        let mut values = Vec::with_capacity(self.mels * frames);
        for m in 0..self.mels {
            values.extend_from_slice(&self.row(m)[..frames]);
        }
        MelSpectrogram {
            mels: self.mels,
            frames,
            values,
        }
    }
}

/// Mel analysis bound to one configuration; reuse it across many waveforms.
#[derive(Debug, Clone)]
pub struct MelAnalyzer {
    plan: StftPlan,
    filterbank: MelFilterbank,
    sample_rate: u32,
}

impl MelAnalyzer {
    pub fn new(cfg: &VocoderConfig) -> Result<Self> {
        Ok(Self {
            plan: StftPlan::new(cfg.n_fft, cfg.hop_size, cfg.win_size, true)?,
            filterbank: mel_filterbank(cfg)?,
            sample_rate: cfg.sampling_rate,
        })
    }

    pub fn analyze(&self, w: &Waveform) -> Result<MelSpectrogram> {
        w.require_rate(self.sample_rate)?;
        let spec = stft(w, &self.plan)?;
        let mel = self.filterbank.apply(&spec)?;
        MelSpectrogram::new(
            self.filterbank.mels,
            spec.frames,
            mel.into_iter().map(clamped_log).collect(),
        )
    }
}

pub fn mel_spectrogram(w: &Waveform, cfg: &VocoderConfig) -> Result<MelSpectrogram> {
    MelAnalyzer::new(cfg)?.analyze(w)
}

/// Log-magnitude spectrograms, one per `[n_fft, hop, win]` triple, in order.
pub fn multi_resolution_spectrograms(
    w: &Waveform,
    resolutions: &[Resolution],
) -> Result<Vec<Spectrogram>> {
    if resolutions.is_empty() {
        return Err(Error::InvalidParameter("no resolutions given".into()));
    }
    resolutions
        .iter()
        .map(|&r| Ok(stft(w, &StftPlan::from_resolution(r)?)?.to_log()))
        .collect()
}
