//! Hilbert-transform envelopes and the Butterworth low-pass used by the
//! envelope discriminator's filtered modes.

use std::f64::consts::PI;
use std::fmt;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};

/// Butterworth order used by the filtered envelope modes.
pub const DEFAULT_FILTER_ORDER: usize = 4;

/// Envelope extraction mode, tagged by its integer code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub enum EnvelopeMode {
    /// `-1`: negated instantaneous amplitude.
    Lower,
    /// `0`: the input itself.
    Identity,
    /// `1`: instantaneous amplitude.
    Upper,
    /// `300`: amplitude of the 300 Hz low-passed signal.
    Lowpass300,
    /// `500`: amplitude of the 500 Hz low-passed signal.
    Lowpass500,
}

impl EnvelopeMode {
    /// All modes in discriminator order.
    pub const ALL: [EnvelopeMode; 5] = [
        EnvelopeMode::Lower,
        EnvelopeMode::Identity,
        EnvelopeMode::Upper,
        EnvelopeMode::Lowpass300,
        EnvelopeMode::Lowpass500,
    ];

    pub fn tag(self) -> i32 {
        match self {
            EnvelopeMode::Lower => -1,
            EnvelopeMode::Identity => 0,
            EnvelopeMode::Upper => 1,
            EnvelopeMode::Lowpass300 => 300,
            EnvelopeMode::Lowpass500 => 500,
        }
    }

    pub fn cutoff_hz(self) -> Option<f64> {
        match self {
            EnvelopeMode::Lowpass300 => Some(300.0),
            EnvelopeMode::Lowpass500 => Some(500.0),
            _ => None,
        }
    }
}

impl TryFrom<i32> for EnvelopeMode {
    type Error = Error;

    fn try_from(tag: i32) -> Result<Self> {
        match tag {
            -1 => Ok(EnvelopeMode::Lower),
            0 => Ok(EnvelopeMode::Identity),
            1 => Ok(EnvelopeMode::Upper),
            300 => Ok(EnvelopeMode::Lowpass300),
            500 => Ok(EnvelopeMode::Lowpass500),
            other => Err(Error::InvalidParameter(format!(
                "envelope mode must be one of -1, 0, 1, 300, 500; got {other}"
            ))),
        }
    }
}

impl From<EnvelopeMode> for i32 {
    fn from(m: EnvelopeMode) -> i32 {
        m.tag()
    }
}

impl fmt::Display for EnvelopeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tag())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSignal {
    real: Vec<f64>,
    imag: Vec<f64>,
}

impl AnalyticSignal {
    pub fn real_part(&self) -> &[f64] {
        &self.real
    }

    /// The Hilbert transform of the input.
    pub fn imag_part(&self) -> &[f64] {
        &self.imag
    }

    pub fn len(&self) -> usize {
        self.real.len()
    }

    pub fn is_empty(&self) -> bool {
        self.real.is_empty()
    }
}

/// FFT analytic signal over the whole input, no padding.
///
/// The real part is the input itself; the FFT round trip only feeds the
/// imaginary part.
pub fn analytic_signal(w: &Waveform) -> Result<AnalyticSignal> {
    analytic_signal_samples(w.samples())
}

pub(crate) fn analytic_signal_samples(x: &[f64]) -> Result<AnalyticSignal> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "analytic signal needs at least 2 samples, got {n}"
        )));
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    // Keep DC (and Nyquist for even n), double positive, zero negative.
    let half = n / 2;
    let positive_end = if n.is_multiple_of(2) { half } else { half + 1 };
    for c in &mut buf[1..positive_end] {
        *c *= 2.0;
    }
    for c in &mut buf[half + 1..] {
        *c = Complex::default();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(AnalyticSignal {
        real: x.to_vec(),
        imag: buf.iter().map(|c| c.im * scale).collect(),
    })
}

pub fn instantaneous_amplitude(a: &AnalyticSignal) -> Vec<f64> {
    a.real.iter().zip(&a.imag).map(|(r, i)| r.hypot(*i)).collect()
}

/// One biquad, `b0 + b1 z^-1 + b2 z^-2 over 1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex<f64>) -> Complex<f64> {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z2 * self.b[2];
        let den = Complex::new(1.0, 0.0) + z_inv * self.a[0] + z2 * self.a[1];
        num / den
    }

    /// Roots of `z^2 + a1 z + a2`.
    fn poles(&self) -> [Complex<f64>; 2] {
        let [a1, a2] = self.a;
        let disc = Complex::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        [(-a1 + disc) / 2.0, (-a1 - disc) / 2.0]
    }
}

/// Digital Butterworth low-pass as a cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct ButterworthFilter {
    order: usize,
    cutoff: f64,
    sample_rate: u32,
    sections: Vec<Biquad>,
}

/// Bilinear-transform Butterworth design with the cutoff prewarped, so the
/// digital gain at `cutoff` is exactly -3.01 dB.
pub fn butterworth_lowpass(order: usize, cutoff: f64, sample_rate: u32) -> Result<ButterworthFilter> {
    let fs = sample_rate as f64;
    if order == 0 {
        return Err(Error::InvalidParameter("filter order must be >= 1".into()));
    }
    if !(cutoff > 0.0 && cutoff < fs / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "cutoff {cutoff} Hz outside (0, {}) Hz",
            fs / 2.0
        )));
    }
    let k = 2.0 * fs;
    let wc = k * (PI * cutoff / fs).tan();
    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for i in 0..order / 2 {
        // Analog pole pair wc * exp(j*theta), theta in (pi/2, pi).
        let theta = PI * (2 * i + 1 + order) as f64 / (2 * order) as f64;
        let re = wc * theta.cos();
        let mag2 = wc * wc;
        let a0 = k * k - 2.0 * re * k + mag2;
        let a1 = 2.0 * mag2 - 2.0 * k * k;
        let a2 = k * k + 2.0 * re * k + mag2;
        let g = mag2 / a0;
        sections.push(Biquad {
            b: [g, 2.0 * g, g],
            a: [a1 / a0, a2 / a0],
        });
    }
    if order % 2 == 1 {
        let a0 = k + wc;
        let g = wc / a0;
        sections.push(Biquad {
            b: [g, g, 0.0],
            a: [(wc - k) / a0, 0.0],
        });
    }
    Ok(ButterworthFilter {
        order,
        cutoff,
        sample_rate,
        sections,
    })
}

impl ButterworthFilter {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Complex response at `freq` Hz.
    pub fn response(&self, freq: f64) -> Complex<f64> {
        let omega = 2.0 * PI * freq / self.sample_rate as f64;
        let z_inv = Complex::from_polar(1.0, -omega);
        self.sections
            .iter()
            .fold(Complex::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude(&self, freq: f64) -> f64 {
        self.response(freq).norm()
    }

    pub fn is_stable(&self) -> bool {
        self.sections
            .iter()
            .all(|s| s.poles().iter().all(|p| p.norm() < 1.0))
    }

    /// Causal filtering from zero initial state (transposed direct form II).
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in y.iter_mut() {
                let input = *v;
                let out = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[0] * out + z2;
                z2 = s.b[2] * input - s.a[1] * out;
                *v = out;
            }
        }
        y
    }
}

pub fn filter_apply(f: &ButterworthFilter, w: &Waveform) -> Result<Waveform> {
    w.require_rate(f.sample_rate)?;
    w.with_samples(f.filter(w.samples()))
}

pub fn extract_envelope(w: &Waveform, mode: EnvelopeMode) -> Result<Waveform> {
    extract_envelope_with_order(w, mode, DEFAULT_FILTER_ORDER)
}

pub fn extract_envelope_with_order(
    w: &Waveform,
    mode: EnvelopeMode,
    order: usize,
) -> Result<Waveform> {
    if w.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "envelope needs at least 2 samples, got {}",
            w.len()
        )));
    }
    let samples = match mode {
        EnvelopeMode::Identity => return Ok(w.clone()),
        EnvelopeMode::Upper => instantaneous_amplitude(&analytic_signal(w)?),
        EnvelopeMode::Lower => instantaneous_amplitude(&analytic_signal(w)?)
            .into_iter()
            .map(|v| -v)
            .collect(),
        EnvelopeMode::Lowpass300 | EnvelopeMode::Lowpass500 => {
            let cutoff = mode.cutoff_hz().expect("filtered mode");
            let filter = butterworth_lowpass(order, cutoff, w.sample_rate())?;
            let filtered = filter.filter(w.samples());
            instantaneous_amplitude(&analytic_signal_samples(&filtered)?)
        }
    };
    w.with_samples(samples)
}
