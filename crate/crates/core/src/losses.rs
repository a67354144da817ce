//! Least-squares adversarial losses, mel L1, feature matching and the
//! weighted generator / discriminator totals.

use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::config::VocoderConfig;
use crate::error::{Error, Result};
use crate::netgraph::DiscriminatorOutput;
use crate::spectral::MelAnalyzer;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_fm: f64,
    pub lambda_mel: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_fm: 2.0,
            lambda_mel: 45.0,
        }
    }
}

impl LossWeights {
    pub fn new(lambda_fm: f64, lambda_mel: f64) -> Result<Self> {
        if !(lambda_fm >= 0.0 && lambda_mel >= 0.0) || !lambda_fm.is_finite() || !lambda_mel.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "loss weights must be finite and nonnegative, got ({lambda_fm}, {lambda_mel})"
            )));
        }
        Ok(Self { lambda_fm, lambda_mel })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub adv_d_per_k: Vec<f64>,
    pub adv_g_per_k: Vec<f64>,
    pub fm_per_k: Vec<f64>,
    pub mel: f64,
    pub total_g: f64,
    pub total_d: f64,
}

impl LossBreakdown {
    /// Assembles the weighted totals from per-sub-discriminator terms.
    pub fn from_terms(
        adv_d_per_k: Vec<f64>,
        adv_g_per_k: Vec<f64>,
        fm_per_k: Vec<f64>,
        mel: f64,
        weights: LossWeights,
    ) -> Result<Self> {
        if adv_d_per_k.len() != adv_g_per_k.len() || adv_g_per_k.len() != fm_per_k.len() {
            return Err(Error::Shape("per-discriminator term lists differ in length".into()));
        }
        let total_g = adv_g_per_k
            .iter()
            .zip(&fm_per_k)
            .map(|(g, fm)| g + weights.lambda_fm * fm)
            .sum::<f64>()
            + weights.lambda_mel * mel;
        let total_d = adv_d_per_k.iter().sum();
        Ok(Self {
            adv_d_per_k,
            adv_g_per_k,
            fm_per_k,
            mel,
            total_g,
            total_d,
        })
    }
}

fn nonempty(x: &[f32], what: &'static str) -> Result<()> {
    if x.is_empty() {
        Err(Error::Empty(what))
    } else {
        Ok(())
    }
}

fn mean(x: impl Iterator<Item = f64>, n: usize) -> f64 {
    x.sum::<f64>() / n as f64
}

/// Discriminator loss: mean (D(x) − 1)² plus mean D(G(s))².
pub fn adv_loss_d(scores_real: &[f32], scores_gen: &[f32]) -> Result<f64> {
    nonempty(scores_real, "real scores")?;
    nonempty(scores_gen, "generated scores")?;
    let r = mean(scores_real.iter().map(|&s| (s as f64 - 1.0).powi(2)), scores_real.len());
    let g = mean(scores_gen.iter().map(|&s| (s as f64).powi(2)), scores_gen.len());
    Ok(r + g)
}

/// Generator adversarial loss: mean (D(G(s)) − 1)².
pub fn adv_loss_g(scores_gen: &[f32]) -> Result<f64> {
    nonempty(scores_gen, "generated scores")?;
    Ok(mean(scores_gen.iter().map(|&s| (s as f64 - 1.0).powi(2)), scores_gen.len()))
}

/// Mean absolute difference between the log-mel spectrograms.
pub fn mel_loss(real: &Waveform, gen: &Waveform, cfg: &VocoderConfig) -> Result<f64> {
    if real.sample_rate() != gen.sample_rate() {
        return Err(Error::SampleRateMismatch {
            expected: real.sample_rate(),
            actual: gen.sample_rate(),
        });
    }
    if real.len() != gen.len() {
        return Err(Error::Shape(format!(
            "mel loss needs equal lengths, got {} and {}",
            real.len(),
            gen.len()
        )));
    }
    let analyzer = MelAnalyzer::new(cfg)?;
    let a = analyzer.analyze(real)?;
    let b = analyzer.analyze(gen)?;
    let n = a.values.len();
    Ok(mean(a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()), n))
}

/// Sum over layers of the per-layer mean absolute difference.
pub fn feature_matching_loss(real_feats: &[Tensor], gen_feats: &[Tensor]) -> Result<f64> {
    if real_feats.len() != gen_feats.len() {
        return Err(Error::Shape(format!(
            "feature matching over {} vs {} layers",
            real_feats.len(),
            gen_feats.len()
        )));
    }
    let mut total = 0.0;
    for (l, (r, g)) in real_feats.iter().zip(gen_feats).enumerate() {
        if r.shape() != g.shape() {
            return Err(Error::Shape(format!(
                "layer {l}: {:?} vs {:?}",
                r.shape(),
                g.shape()
            )));
        }
        nonempty(r.data(), "feature map")?;
        total += mean(
            r.data().iter().zip(g.data()).map(|(a, b)| (*a as f64 - *b as f64).abs()),
            r.len(),
        );
    }
    Ok(total)
}

/// Full objective over an ensemble, summing flatly over every
/// sub-discriminator in `real` / `gen` (which must be aligned).
pub fn total_losses(
    real: &DiscriminatorOutput,
    gen: &DiscriminatorOutput,
    real_wav: &Waveform,
    gen_wav: &Waveform,
    weights: LossWeights,
    cfg: &VocoderConfig,
) -> Result<LossBreakdown> {
    if real.len() != gen.len() {
        return Err(Error::Shape(format!(
            "ensemble outputs hold {} and {} sub-discriminators",
            real.len(),
            gen.len()
        )));
    }
    let mut adv_d = Vec::with_capacity(real.len());
    let mut adv_g = Vec::with_capacity(real.len());
    let mut fm = Vec::with_capacity(real.len());
    for k in 0..real.len() {
        adv_d.push(adv_loss_d(real.score_maps[k].data(), gen.score_maps[k].data())?);
        adv_g.push(adv_loss_g(gen.score_maps[k].data())?);
        fm.push(feature_matching_loss(&real.feature_maps[k], &gen.feature_maps[k])?);
    }
    let mel = mel_loss(real_wav, gen_wav, cfg)?;
    LossBreakdown::from_terms(adv_d, adv_g, fm, mel, weights)
}
