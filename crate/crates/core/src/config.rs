//! Vocoder configuration using the `config_v1.json` key names.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Snake,
    Snakebeta,
    LeakyRelu,
}

/// One `[n_fft, hop_length, win_length]` analysis triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 3]", into = "[usize; 3]")]
pub struct Resolution {
    pub n_fft: usize,
    pub hop: usize,
    pub win: usize,
}

impl From<[usize; 3]> for Resolution {
    fn from([n_fft, hop, win]: [usize; 3]) -> Self {
        Self { n_fft, hop, win }
    }
}

impl From<Resolution> for [usize; 3] {
    fn from(r: Resolution) -> Self {
        [r.n_fft, r.hop, r.win]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocoderConfig {
    pub num_mels: usize,
    pub n_fft: usize,
    pub win_size: usize,
    pub hop_size: usize,
    pub sampling_rate: u32,
    pub fmin: f64,
    pub fmax: f64,
    pub segment_size: usize,
    pub upsample_rates: Vec<usize>,
    pub upsample_kernel_sizes: Vec<usize>,
    pub upsample_initial_channel: usize,
    pub resblock_kernel_sizes: Vec<usize>,
    pub resblock_dilation_sizes: Vec<Vec<usize>>,
    pub resolutions: Vec<Resolution>,
    pub mpd_reshapes: Vec<usize>,
    pub activation: ActivationKind,
    pub snake_logscale: bool,
    pub use_spectral_norm: bool,
    pub discriminator_channel_mult: f64,
}

const KNOWN_KEYS: &[&str] = &[
    "num_mels",
    "n_fft",
    "win_size",
    "hop_size",
    "sampling_rate",
    "fmin",
    "fmax",
    "segment_size",
    "upsample_rates",
    "upsample_kernel_sizes",
    "upsample_initial_channel",
    "resblock_kernel_sizes",
    "resblock_dilation_sizes",
    "resolutions",
    "mpd_reshapes",
    "activation",
    "snake_logscale",
    "use_spectral_norm",
    "discriminator_channel_mult",
];

impl Default for VocoderConfig {
    fn default() -> Self {
        Self::config_v1()
    }
}

impl VocoderConfig {
    /// The reference 24 kHz configuration.
    pub fn config_v1() -> Self {
        Self {
            num_mels: 80,
            n_fft: 1024,
            win_size: 1024,
            hop_size: 256,
            sampling_rate: 24000,
            fmin: 0.0,
            fmax: 12000.0,
            segment_size: 8192,
            upsample_rates: vec![8, 8, 2, 2],
            upsample_kernel_sizes: vec![16, 16, 4, 4],
            upsample_initial_channel: 512,
            resblock_kernel_sizes: vec![3, 7, 11],
            resblock_dilation_sizes: vec![vec![1, 3, 5]; 3],
            resolutions: vec![
                [1024, 120, 600].into(),
                [2048, 240, 1200].into(),
                [512, 50, 240].into(),
            ],
            mpd_reshapes: vec![2, 3, 5, 7, 11],
            activation: ActivationKind::Snakebeta,
            snake_logscale: true,
            use_spectral_norm: false,
            discriminator_channel_mult: 1.0,
        }
    }

    pub fn upsample_factor(&self) -> usize {
        self.upsample_rates.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.num_mels == 0 || self.n_fft == 0 || self.win_size == 0 || self.hop_size == 0 {
            return fail("num_mels, n_fft, win_size and hop_size must be positive".into());
        }
        if self.sampling_rate == 0 {
            return fail("sampling_rate must be positive".into());
        }
        if self.win_size > self.n_fft {
            return fail(format!(
                "win_size {} exceeds n_fft {}",
                self.win_size, self.n_fft
            ));
        }
        if self.hop_size > self.win_size {
            return fail(format!(
                "hop_size {} exceeds win_size {}",
                self.hop_size, self.win_size
            ));
        }
        let nyquist = self.sampling_rate as f64 / 2.0;
        if !(self.fmin >= 0.0 && self.fmin < self.fmax && self.fmax <= nyquist) {
            return fail(format!(
                "need 0 <= fmin < fmax <= {nyquist}, got fmin {} fmax {}",
                self.fmin, self.fmax
            ));
        }
        if self.upsample_rates.len() != self.upsample_kernel_sizes.len() {
            return fail("upsample_rates and upsample_kernel_sizes differ in length".into());
        }
        if self.upsample_rates.contains(&0) {
            return fail("upsample rates must be positive".into());
        }
        if self.upsample_factor() != self.hop_size {
            return fail(format!(
                "product of upsample_rates is {} but hop_size is {}",
                self.upsample_factor(),
                self.hop_size
            ));
        }
        if self.resblock_kernel_sizes.len() != self.resblock_dilation_sizes.len() {
            return fail(
                "resblock_kernel_sizes and resblock_dilation_sizes differ in length".into(),
            );
        }
        for r in &self.resolutions {
            if r.hop == 0 || r.hop > r.win || r.win > r.n_fft {
                return fail(format!(
                    "resolution [{}, {}, {}] must satisfy 0 < hop <= win <= n_fft",
                    r.n_fft, r.hop, r.win
                ));
            }
        }
        if self.mpd_reshapes.contains(&0) {
            return fail("mpd periods must be positive".into());
        }
        if !(self.discriminator_channel_mult > 0.0) {
            return fail("discriminator_channel_mult must be positive".into());
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let serde_json::Value::Object(mut map) = value else {
            return Err(Error::Config("config must be a JSON object".into()));
        };
        let unknown: Vec<String> = map
            .keys()
            .filter(|k| !KNOWN_KEYS.contains(&k.as_str()))
            .cloned()
            .collect();
        for key in &unknown {
            log::warn!("ignoring unknown config key `{key}`");
            map.remove(key);
        }
        for key in KNOWN_KEYS {
            if !map.contains_key(*key) {
                return Err(Error::Config(format!("missing required key `{key}`")));
            }
        }
        let cfg: VocoderConfig = serde_json::from_value(serde_json::Value::Object(map))
            .map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Short stable digest of the configuration, used to tag outputs.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<VocoderConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    VocoderConfig::from_json_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v1_json() -> serde_json::Value {
        serde_json::to_value(VocoderConfig::config_v1()).unwrap()
    }

    #[test]
    fn config_v1_values() {
        let mut v = v1_json();
        v["resblock"] = "1".into();
        v["batch_size"] = 16.into();
        let cfg = VocoderConfig::from_json_str(&v.to_string()).unwrap();
        assert_eq!(cfg.num_mels, 80);
        assert_eq!(cfg.n_fft, 1024);
        assert_eq!(cfg.hop_size, 256);
        assert_eq!(cfg.sampling_rate, 24000);
        assert_eq!(cfg.fmax, 12000.0);
        assert_eq!(cfg.upsample_factor(), 256);
        assert_eq!(cfg.resolutions[1], Resolution { n_fft: 2048, hop: 240, win: 1200 });
    }

    #[test]
    fn upsample_product_must_match_hop() {
        let mut v = v1_json();
        v["upsample_rates"] = serde_json::json!([8, 8, 2]);
        v["upsample_kernel_sizes"] = serde_json::json!([16, 16, 4]);
        let err = VocoderConfig::from_json_str(&v.to_string()).unwrap_err();
        assert!(matches!(err, Error::Config(m) if m.contains("128")));
    }

    #[test]
    fn missing_key_reported() {
        let mut v = v1_json();
        v.as_object_mut().unwrap().remove("num_mels");
        let err = VocoderConfig::from_json_str(&v.to_string()).unwrap_err();
        assert!(matches!(err, Error::Config(m) if m.contains("num_mels")));
    }

    #[test]
    fn invariant_violations() {
        let mut cfg = VocoderConfig::config_v1();
        cfg.fmax = 13000.0;
        assert!(cfg.validate().is_err());
        let mut cfg = VocoderConfig::config_v1();
        cfg.win_size = 2048;
        assert!(cfg.validate().is_err());
        let mut cfg = VocoderConfig::config_v1();
        cfg.resblock_dilation_sizes.pop();
        assert!(cfg.validate().is_err());
        let mut cfg = VocoderConfig::config_v1();
        cfg.resolutions[0] = [512, 600, 240].into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = VocoderConfig::config_v1();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.num_mels = 100;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
