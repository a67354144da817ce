//! YIN pitch and periodicity tracking, and the periodicity error metric.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::audio::Waveform;
use crate::error::{Error, Result};

pub const YIN_HOP_SECS: f64 = 0.010;
pub const YIN_FMIN: f64 = 50.0;
pub const YIN_FMAX: f64 = 1100.0;
/// Absolute threshold for the first-dip search.
pub const YIN_THRESHOLD: f64 = 0.1;
/// A frame counts as voiced when its normalized difference dips below this.
pub const VOICING_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PitchTrack {
    pub hop: usize,
    /// f0 in Hz per frame; `None` when unvoiced.
    pub f0: Vec<Option<f64>>,
    /// `1 - d'(tau*)`, clamped to [0, 1].
    pub periodicity: Vec<f64>,
}

impl PitchTrack {
    pub fn len(&self) -> usize {
        self.periodicity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periodicity.is_empty()
    }

    pub fn voiced(&self, t: usize) -> bool {
        self.f0[t].is_some()
    }
}

/// YIN estimator bound to a sample rate; integration window equals the
/// longest lag, so one frame spans two periods of the lowest pitch.
pub struct Yin {
    sample_rate: u32,
    hop: usize,
    tau_min: usize,
    tau_max: usize,
    window: usize,
    fft_len: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Yin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Yin")
            .field("sample_rate", &self.sample_rate)
            .field("hop", &self.hop)
            .field("tau_min", &self.tau_min)
            .field("tau_max", &self.tau_max)
            .finish()
    }
}

impl Yin {
    pub fn new(sample_rate: u32) -> Result<Self> {
        let sr = sample_rate as f64;
        let tau_min = (sr / YIN_FMAX).floor().max(2.0) as usize;
        let tau_max = (sr / YIN_FMIN).ceil() as usize;
        if tau_max <= tau_min + 2 {
            return Err(Error::InvalidParameter(format!(
                "sample rate {sample_rate} too low for pitch tracking"
            )));
        }
        let window = tau_max;
        let fft_len = (window + tau_max + 1).next_power_of_two() * 2;
        let mut planner = FftPlanner::new();
        Ok(Self {
            sample_rate,
            hop: (sr * YIN_HOP_SECS).round() as usize,
            tau_min,
            tau_max,
            window,
            fft_len,
            fft: planner.plan_fft_forward(fft_len),
            ifft: planner.plan_fft_inverse(fft_len),
        })
    }

    /// Samples covered by one analysis frame.
    pub fn frame_len(&self) -> usize {
        self.window + self.tau_max + 1
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn num_frames(&self, len: usize) -> usize {
        if len < self.frame_len() {
            0
        } else {
            (len - self.frame_len()) / self.hop + 1
        }
    }

    /// Cumulative-mean-normalized difference `d'(tau)` for `tau in 0..=tau_max`.
    pub fn cmnd(&self, frame: &[f64]) -> Vec<f64> {
        let w = self.window;
        let n = self.frame_len();
        debug_assert_eq!(frame.len(), n);
        // r(tau) = sum_{j<w} x[j] x[j+tau] via one FFT cross-correlation.
        let mut a: Vec<Complex<f64>> = (0..self.fft_len)
            .map(|i| Complex::new(if i < w { frame[i] } else { 0.0 }, 0.0))
            .collect();
        let mut b: Vec<Complex<f64>> = (0..self.fft_len)
            .map(|i| Complex::new(if i < n { frame[i] } else { 0.0 }, 0.0))
            .collect();
        self.fft.process(&mut a);
        self.fft.process(&mut b);
        for (x, y) in a.iter_mut().zip(&b) {
            *x = x.conj() * y;
        }
        self.ifft.process(&mut a);
        let scale = 1.0 / self.fft_len as f64;
        let mut prefix = vec![0.0; n + 1];
        for (i, v) in frame.iter().enumerate() {
            prefix[i + 1] = prefix[i] + v * v;
        }
        let e0 = prefix[w];
        let mut d = vec![0.0; self.tau_max + 1];
        for (tau, dv) in d.iter_mut().enumerate().skip(1) {
            let r = a[tau].re * scale;
            let e_tau = prefix[tau + w] - prefix[tau];
            *dv = (e0 + e_tau - 2.0 * r).max(0.0);
        }
        let mut out = vec![1.0; self.tau_max + 1];
        let mut running = 0.0;
        for tau in 1..=self.tau_max {
            running += d[tau];
            out[tau] = if running > 0.0 { d[tau] * tau as f64 / running } else { 1.0 };
        }
        out
    }

    /// Best lag (fractional) and its normalized difference for one frame.
    fn pick(&self, dp: &[f64]) -> (f64, f64) {
        let (lo, hi) = (self.tau_min, self.tau_max);
        let mut tau = (lo..=hi)
            .find(|&t| dp[t] < YIN_THRESHOLD)
            .map(|mut t| {
                while t < hi && dp[t + 1] < dp[t] {
                    t += 1;
                }
                t
            })
            .unwrap_or_else(|| {
                (lo..=hi)
                    .min_by(|&x, &y| dp[x].total_cmp(&dp[y]))
                    .unwrap_or(lo)
            });
        tau = tau.clamp(lo, hi);
        let value = dp[tau];
        let mut frac = tau as f64;
        if tau > lo && tau < hi {
            let (l, c, r) = (dp[tau - 1], dp[tau], dp[tau + 1]);
            let denom = l - 2.0 * c + r;
            if denom > 0.0 {
                frac += (0.5 * (l - r) / denom).clamp(-1.0, 1.0);
            }
        }
        (frac, value)
    }

    pub fn track(&self, w: &Waveform) -> Result<PitchTrack> {
        w.require_rate(self.sample_rate)?;
        let frames = self.num_frames(w.len());
        if frames == 0 {
            return Err(Error::InvalidParameter(format!(
                "audio of {} samples is shorter than one {}-sample analysis frame",
                w.len(),
                self.frame_len()
            )));
        }
        let x = w.samples();
        let mut f0 = Vec::with_capacity(frames);
        let mut periodicity = Vec::with_capacity(frames);
        for t in 0..frames {
            let frame = &x[t * self.hop..t * self.hop + self.frame_len()];
            if frame.iter().all(|&v| v == 0.0) {
                f0.push(None);
                periodicity.push(0.0);
                continue;
            }
            let dp = self.cmnd(frame);
            let (tau, value) = self.pick(&dp);
            f0.push((value < VOICING_THRESHOLD).then(|| self.sample_rate as f64 / tau));
            periodicity.push((1.0 - value).clamp(0.0, 1.0));
        }
        Ok(PitchTrack {
            hop: self.hop,
            f0,
            periodicity,
        })
    }
}

pub fn pitch_track(w: &Waveform) -> Result<PitchTrack> {
    Yin::new(w.sample_rate())?.track(w)
}

/// RMS difference of the periodicity tracks over frames voiced in either
/// input; 0 when no frame is voiced.
pub fn periodicity_error(reference: &Waveform, generated: &Waveform) -> Result<f64> {
    if reference.sample_rate() != generated.sample_rate() {
        return Err(Error::SampleRateMismatch {
            expected: reference.sample_rate(),
            actual: generated.sample_rate(),
        });
    }
    let yin = Yin::new(reference.sample_rate())?;
    let a = yin.track(reference)?;
    let b = yin.track(generated)?;
    let frames = a.len().min(b.len());
    let (mut sum, mut count) = (0.0, 0usize);
    for t in 0..frames {
        if a.voiced(t) || b.voiced(t) {
            sum += (a.periodicity[t] - b.periodicity[t]).powi(2);
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { (sum / count as f64).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(f: f64, n: usize) -> Waveform {
        Waveform::new((0..n).map(|t| 0.5 * (2.0 * PI * f * t as f64 / 24000.0).sin()).collect(), 24000).unwrap()
    }

    #[test]
    fn cmnd_matches_direct_difference() {
        let yin = Yin::new(8000).unwrap();
        let frame: Vec<f64> = (0..yin.frame_len()).map(|i| ((i * 37 % 17) as f64 - 8.0) / 8.0).collect();
        let fast = yin.cmnd(&frame);
        let w = yin.window;
        let mut running = 0.0;
        for tau in 1..=yin.tau_max {
            let d: f64 = (0..w).map(|j| (frame[j] - frame[j + tau]).powi(2)).sum();
            running += d;
            let want = d * tau as f64 / running;
            assert!((fast[tau] - want).abs() < 1e-9, "tau {tau}");
        }
    }

    #[test]
    fn tone_pitch_recovered() {
        let track = pitch_track(&tone(220.0, 24000)).unwrap();
        for t in 0..track.len() {
            let f = track.f0[t].expect("voiced");
            assert!((f - 220.0).abs() / 220.0 < 0.01, "frame {t}: {f}");
            assert!(track.periodicity[t] > 0.95);
        }
    }

    #[test]
    fn short_audio_rejected() {
        assert!(pitch_track(&tone(220.0, 500)).is_err());
    }
}
