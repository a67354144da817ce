//! Objective quality metrics between reference and generated audio.

pub mod dtw;
pub mod frechet;
pub mod length;
pub mod mcd;
pub mod periodicity;
pub mod spectral;

pub use dtw::{dtw_align, dtw_with_cost, DtwAlignment};
pub use frechet::{embedding_stats, frechet_distance, sqrtm_psd, EmbeddingStats};
pub use length::{length_consistency, LengthReport};
pub use mcd::{mcd, mcd_from_mels, mel_cepstrum, MCD_COEFFS, MCD_SCALE};
pub use periodicity::{periodicity_error, pitch_track, PitchTrack, Yin};
pub use spectral::{gaussian_window, m_stft_loss, m_stft_terms, pcc_mel, pearson, ssim_mel, StftTerms};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio::Waveform;
use crate::config::VocoderConfig;
use crate::error::{Error, Result};
use crate::spectral::MelAnalyzer;

/// Method choices that change absolute metric values; hashed into every
/// report so results from different setups are never silently compared.
pub const METHOD_DESCRIPTION: &str = "mcd=dct2-logmel/c1-c13/exact-dtw/10ln10-sqrt2;\
m_stft=mean(sc+logmag-l1)/config-resolutions;\
ssim=gauss11-s1.5/valid/joint-minmax/k0.01-0.03;\
pcc=flattened-logmel;\
periodicity=yin-cmnd/10ms/50-1100Hz/rms-over-voiced;\
fad=frechet/eigh-clip-1e-8";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub method_hash: String,
    pub toolkit_version: String,
}

impl Provenance {
    pub fn new(cfg: &VocoderConfig) -> Self {
        let digest = Sha256::digest(METHOD_DESCRIPTION.as_bytes());
        Self {
            config_hash: cfg.hash(),
            method_hash: digest[..8].iter().map(|b| format!("{b:02x}")).collect(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mcd: f64,
    pub m_stft: f64,
    pub ssim: f64,
    pub pcc: f64,
    pub periodicity: f64,
    /// Present only when embedding statistics were supplied.
    pub fad: Option<f64>,
    pub provenance: Provenance,
}

impl MetricReport {
    /// Checks every field against its documented range.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mcd", self.mcd, 0.0, f64::INFINITY),
            ("m_stft", self.m_stft, 0.0, f64::INFINITY),
            ("ssim", self.ssim, -1.0, 1.0),
            ("pcc", self.pcc, -1.0, 1.0),
            ("periodicity", self.periodicity, 0.0, f64::INFINITY),
            ("fad", self.fad.unwrap_or(0.0), 0.0, f64::INFINITY),
        ];
        for (name, v, lo, hi) in fields {
            if !v.is_finite() || v < lo || v > hi {
                return Err(Error::Numeric(format!("{name} = {v} outside [{lo}, {hi}]")));
            }
        }
        if self.provenance.config_hash.is_empty() || self.provenance.method_hash.is_empty() {
            return Err(Error::Numeric("empty provenance".into()));
        }
        Ok(())
    }
}

/// Computes every waveform metric for one reference/generated pair.
pub fn compute_metrics(reference: &Waveform, generated: &Waveform, cfg: &VocoderConfig, fad: Option<f64>) -> Result<MetricReport> {
    reference.require_rate(cfg.sampling_rate)?;
    generated.require_rate(cfg.sampling_rate)?;
    let analyzer = MelAnalyzer::new(cfg)?;
    let mel_r = analyzer.analyze(reference)?;
    let mel_g = analyzer.analyze(generated)?;
    let report = MetricReport {
        mcd: mcd_from_mels(&mel_r, &mel_g)?,
        m_stft: m_stft_loss(reference, generated, &cfg.resolutions)?,
        ssim: ssim_mel(&mel_r, &mel_g)?,
        pcc: pcc_mel(&mel_r, &mel_g)?,
        periodicity: periodicity_error(reference, generated)?,
        fad,
        provenance: Provenance::new(cfg),
    };
    report.validate()?;
    Ok(report)
}
