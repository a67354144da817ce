//! Spectrogram-domain metrics: multi-resolution STFT distance, SSIM and
//! Pearson correlation on log-mel matrices.

use crate::audio::Waveform;
use crate::config::Resolution;
use crate::error::{Error, Result};
use crate::spectral::{clamped_log, stft, MelSpectrogram, StftPlan};

/// Per-resolution terms of [`m_stft_loss`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftTerms {
    pub spectral_convergence: f64,
    pub log_magnitude: f64,
}

/// Mean over resolutions of spectral convergence plus mean absolute
/// log-magnitude difference. Inputs are trimmed to the shorter length.
pub fn m_stft_loss(reference: &Waveform, generated: &Waveform, resolutions: &[Resolution]) -> Result<f64> {
    let terms = m_stft_terms(reference, generated, resolutions)?;
    Ok(terms
        .iter()
        .map(|t| t.spectral_convergence + t.log_magnitude)
        .sum::<f64>()
        / terms.len() as f64)
}

pub fn m_stft_terms(reference: &Waveform, generated: &Waveform, resolutions: &[Resolution]) -> Result<Vec<StftTerms>> {
    if reference.sample_rate() != generated.sample_rate() {
        return Err(Error::SampleRateMismatch {
            expected: reference.sample_rate(),
            actual: generated.sample_rate(),
        });
    }
    if resolutions.is_empty() {
        return Err(Error::InvalidParameter("no resolutions given".into()));
    }
    let n = reference.len().min(generated.len());
    if n == 0 {
        return Err(Error::Empty("audio"));
    }
    let r = reference.with_samples(reference.samples()[..n].to_vec())?;
    let g = generated.with_samples(generated.samples()[..n].to_vec())?;
    let mut terms = Vec::with_capacity(resolutions.len());
    for &res in resolutions {
        let plan = StftPlan::from_resolution(res)?;
        let sr = stft(&r, &plan)?;
        let sg = stft(&g, &plan)?;
        let ref_norm = sr.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ref_norm == 0.0 {
            return Err(Error::Numeric(format!(
                "reference spectrum is zero at resolution {:?}; spectral convergence undefined",
                <[usize; 3]>::from(res)
            )));
        }
        let diff_norm = sr
            .values
            .iter()
            .zip(&sg.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let log_l1 = sr
            .values
            .iter()
            .zip(&sg.values)
            .map(|(&a, &b)| (clamped_log(a) - clamped_log(b)).abs())
            .sum::<f64>()
            / sr.values.len() as f64;
        terms.push(StftTerms {
            spectral_convergence: diff_norm / ref_norm,
            log_magnitude: log_l1,
        });
    }
    Ok(terms)
}

fn aligned(a: &MelSpectrogram, b: &MelSpectrogram) -> Result<(MelSpectrogram, MelSpectrogram)> {
    if a.mels != b.mels {
        return Err(Error::Shape(format!("{} vs {} mel bands", a.mels, b.mels)));
    }
    let frames = a.frames.min(b.frames);
    if frames == 0 || a.mels == 0 {
        return Err(Error::Empty("mel spectrogram"));
    }
    Ok((a.trim_frames(frames), b.trim_frames(frames)))
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Normalized 1-D Gaussian of `size` taps.
pub fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// 'valid' separable filtering of a rows x cols matrix.
fn filter_valid(x: &[f64], rows: usize, cols: usize, wr: &[f64], wc: &[f64]) -> Vec<f64> {
    let out_c = cols - wc.len() + 1;
    let out_r = rows - wr.len() + 1;
    let mut tmp = vec![0.0; rows * out_c];
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        for c in 0..out_c {
            tmp[r * out_c + c] = row[c..c + wc.len()].iter().zip(wc).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; out_r * out_c];
    for r in 0..out_r {
        for (k, &w) in wr.iter().enumerate() {
            let src = &tmp[(r + k) * out_c..(r + k + 1) * out_c];
            for (o, &v) in out[r * out_c..(r + 1) * out_c].iter_mut().zip(src) {
                *o += w * v;
            }
        }
    }
    out
}

/// Mean SSIM over 'valid' Gaussian windows of the jointly min-max
/// normalized matrices. The window shrinks to fit matrices smaller than 11.
pub fn ssim_mel(reference: &MelSpectrogram, generated: &MelSpectrogram) -> Result<f64> {
    let (a, b) = aligned(reference, generated)?;
    let (rows, cols) = (a.mels, a.frames);
    let lo = a.values.iter().chain(&b.values).copied().fold(f64::INFINITY, f64::min);
    let hi = a.values.iter().chain(&b.values).copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let norm = |v: &[f64]| v.iter().map(|x| (x - lo) / span).collect::<Vec<f64>>();
    let (x, y) = (norm(&a.values), norm(&b.values));
    let wr = gaussian_window(SSIM_WINDOW.min(rows), SSIM_SIGMA);
    let wc = gaussian_window(SSIM_WINDOW.min(cols), SSIM_SIGMA);
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(u, v)| u * v).collect::<Vec<f64>>();
    let f = |v: &[f64]| filter_valid(v, rows, cols, &wr, &wc);
    let mu_x = f(&x);
    let mu_y = f(&y);
    let xx = f(&prod(&x, &x));
    let yy = f(&prod(&y, &y));
    let xy = f(&prod(&x, &y));
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let n = mu_x.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = xx[i] - mx * mx;
            let vy = yy[i] - my * my;
            let cov = xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / n as f64)
}

/// Pearson correlation over the flattened (frame-trimmed) matrices.
pub fn pcc_mel(reference: &MelSpectrogram, generated: &MelSpectrogram) -> Result<f64> {
    let (a, b) = aligned(reference, generated)?;
    pearson(&a.values, &b.values)
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape("pearson needs equal nonempty inputs".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Numeric("correlation undefined for zero-variance input".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mel(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> MelSpectrogram {
        let v = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        MelSpectrogram::new(rows, cols, v).unwrap()
    }

    #[test]
    fn pcc_examples() {
        let a = mel(5, 9, |r, c| ((r * 7 + c * 3) % 11) as f64);
        assert!((pcc_mel(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let neg = mel(5, 9, |r, c| -a.get(r, c));
        assert!((pcc_mel(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
        let flat = mel(5, 9, |_, _| 3.0);
        assert!(matches!(pcc_mel(&a, &flat), Err(Error::Numeric(_))));
    }

    #[test]
    fn ssim_identity_and_inversion() {
        let a = mel(20, 30, |r, c| ((r as f64 * 0.3).sin() + (c as f64 * 0.2).cos()) * 2.0);
        assert!((ssim_mel(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let inv = mel(20, 30, |r, c| 5.0 - a.get(r, c));
        assert!(ssim_mel(&a, &inv).unwrap() < 1.0);
        let flat = mel(20, 30, |_, _| -4.0);
        assert!((ssim_mel(&flat, &flat).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_is_normalized_and_symmetric() {
        let w = gaussian_window(11, 1.5);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..11 {
            assert_eq!(w[i], w[10 - i]);
        }
    }
}
