//! Vocoder forensics: audio I/O, spectral and envelope analysis, the AMP
//! generator and its discriminators, adversarial losses and objective
//! metrics.

pub mod activations;
pub mod audio;
pub mod config;
pub mod dump;
pub mod envelope;
pub mod losses;
pub mod metrics;
pub mod error;
pub mod netgraph;
pub mod spectral;
pub mod tensor;

pub use audio::{normalize_peak, read_wav, write_wav, WavEncoding, Waveform};
pub use config::{load_config, ActivationKind, Resolution, VocoderConfig};
pub use dump::{DumpHeader, MatrixDump};
pub use envelope::{extract_envelope, EnvelopeMode};
pub use error::{Error, Result};
pub use spectral::{mel_spectrogram, stft, MelSpectrogram, SpecKind, Spectrogram, StftPlan};
pub use tensor::Tensor;
pub use losses::{LossBreakdown, LossWeights};
pub use metrics::{compute_metrics, MetricReport};
pub use netgraph::{DiscriminatorKind, DiscriminatorOutput, NetKind, WeightBundle};
