//! Weight bundles: a JSON manifest (`<stem>.manifest.json`) describing
//! named tensors stored back to back as little-endian f32 in `<stem>.bin`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::spec::{ParamInit, ParamSpec};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const BUNDLE_FORMAT: &str = "vocoscope-weights";
pub const BUNDLE_VERSION: u32 = 1;

/// Standard deviation of [`random_init`] weights.
pub const INIT_STD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: Tensor,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    /// Network the bundle belongs to, e.g. `generator` or `med`.
    pub net: String,
    pub config_hash: String,
    pub created_by: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    offset: u64,
    length: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    meta: BundleMeta,
    tensors: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightBundle {
    tensors: BTreeMap<String, Tensor>,
    pub meta: BundleMeta,
}

pub fn bundle_paths(stem: impl AsRef<Path>) -> (PathBuf, PathBuf) {
    let stem = stem.as_ref();
    let base = stem.as_os_str().to_string_lossy();
    let base = base
        .strip_suffix(".manifest.json")
        .or_else(|| base.strip_suffix(".bin"))
        .unwrap_or(&base)
        .to_string();
    (
        PathBuf::from(format!("{base}.manifest.json")),
        PathBuf::from(format!("{base}.bin")),
    )
}

impl WeightBundle {
    pub fn new(meta: BundleMeta) -> Self {
        Self {
            tensors: BTreeMap::new(),
            meta,
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if !tensor.is_finite() {
            return Err(Error::Weights(format!("tensor `{name}` has non-finite entries")));
        }
        if self.tensors.contains_key(&name) {
            return Err(Error::Weights(format!("duplicate tensor `{name}`")));
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Weights(format!("missing tensor `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = NamedTensor> + '_ {
        self.tensors.iter().map(|(n, t)| NamedTensor {
            name: n.clone(),
            tensor: t.clone(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.tensors.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn num_values(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Every spec'd tensor must be present with the spec'd shape.
    pub fn check_against(&self, specs: &[ParamSpec]) -> Result<()> {
        for s in specs {
            let t = self.get(&s.name)?;
            if t.shape() != s.shape.as_slice() {
                return Err(Error::Weights(format!(
                    "tensor `{}` has shape {:?}, architecture needs {:?}",
                    s.name,
                    t.shape(),
                    s.shape
                )));
            }
        }
        if self.tensors.len() > specs.len() {
            log::warn!(
                "bundle carries {} tensors not used by the architecture",
                self.tensors.len() - specs.len()
            );
        }
        Ok(())
    }

    pub fn save(&self, stem: impl AsRef<Path>) -> Result<()> {
        let (manifest_path, bin_path) = bundle_paths(stem);
        let mut entries = Vec::with_capacity(self.tensors.len());
        let file = std::fs::File::create(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut offset = 0u64;
        for (name, t) in &self.tensors {
            let mut bytes = Vec::with_capacity(t.len() * 4);
            for v in t.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            out.write_all(&bytes).map_err(|e| Error::io(&bin_path, e))?;
            entries.push(ManifestEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                dtype: "float32".into(),
                offset,
                length: t.len() as u64,
            });
            offset += bytes.len() as u64;
        }
        out.flush().map_err(|e| Error::io(&bin_path, e))?;
        let manifest = Manifest {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            meta: self.meta.clone(),
            tensors: entries,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))
    }

    pub fn load(stem: impl AsRef<Path>) -> Result<Self> {
        let (manifest_path, bin_path) = bundle_paths(stem);
        let text =
            std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.format != BUNDLE_FORMAT || manifest.version != BUNDLE_VERSION {
            return Err(Error::Weights(format!(
                "unsupported bundle format {} v{}",
                manifest.format, manifest.version
            )));
        }
        let mut blob = Vec::new();
        std::fs::File::open(&bin_path)
            .and_then(|mut f| f.read_to_end(&mut blob))
            .map_err(|e| Error::io(&bin_path, e))?;
        let mut bundle = WeightBundle::new(manifest.meta);
        for e in manifest.tensors {
            if e.dtype != "float32" {
                return Err(Error::Weights(format!("tensor `{}` has dtype {}", e.name, e.dtype)));
            }
            let start = e.offset as usize;
            let end = start + 4 * e.length as usize;
            if end > blob.len() {
                return Err(Error::Weights(format!(
                    "tensor `{}` runs past the end of {}",
                    e.name,
                    bin_path.display()
                )));
            }
            let data = blob[start..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let tensor = Tensor::new(e.shape, data).map_err(|err| {
                Error::Weights(format!("tensor `{}`: {err}", e.name))
            })?;
            bundle.insert(e.name, tensor)?;
        }
        Ok(bundle)
    }
}

/// Deterministic initialisation: convolution tensors ~ N(0, 0.01), Snake
/// parameters 1 (stored as 0 under log scale).
pub fn random_init(specs: &[ParamSpec], seed: u64, meta: BundleMeta) -> WeightBundle {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f32, INIT_STD as f32).expect("valid std");
    let mut bundle = WeightBundle::new(BundleMeta {
        seed: Some(seed),
        ..meta
    });
    for s in specs {
        let n: usize = s.shape.iter().product();
        let data = match s.init {
            ParamInit::Normal => (0..n).map(|_| normal.sample(&mut rng)).collect(),
            ParamInit::SnakeLog => vec![0.0; n],
            ParamInit::SnakeLinear => vec![1.0; n],
        };
        bundle
            .insert(s.name.clone(), Tensor::new(s.shape.clone(), data).expect("spec shape"))
            .expect("spec names are unique");
    }
    bundle
}
