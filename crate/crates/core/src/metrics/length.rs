//! Mel-frame / waveform length audit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthReport {
    pub mel_frames: usize,
    pub hop: usize,
    pub expected_samples: usize,
    pub actual_samples: usize,
    /// `actual - expected`, in samples.
    pub diff_samples: i64,
    pub diff_seconds: f64,
    pub pass: bool,
}

/// Checks `waveform_len` against `mel_frames * hop`; passes iff the
/// difference is at most one hop.
pub fn length_consistency(mel_frames: usize, waveform_len: usize, hop: usize, sample_rate: u32) -> Result<LengthReport> {
    if hop == 0 || sample_rate == 0 {
        return Err(Error::InvalidParameter("hop and sample rate must be positive".into()));
    }
    let expected = mel_frames * hop;
    let diff = waveform_len as i64 - expected as i64;
    Ok(LengthReport {
        mel_frames,
        hop,
        expected_samples: expected,
        actual_samples: waveform_len,
        diff_samples: diff,
        diff_seconds: diff as f64 / sample_rate as f64,
        pass: diff.unsigned_abs() <= hop as u64,
    })
}
