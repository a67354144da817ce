//! Forward-only network graphs: convolutions, the AMP generator and the
//! envelope / resolution / period / scale discriminators.

pub mod conv;
pub mod forward;
pub mod spec;
pub mod weights;

pub use conv::{conv1d, conv2d, conv_transpose1d, Conv1dParams, Conv2dParams};
pub use forward::{
    avg_pool1d, generator_forward, generator_forward_tensor, med_forward, mpd_forward,
    mrd_forward, msd_forward, period_reshape, DiscriminatorOutput,
};
pub use spec::{
    build_discriminator, build_generator, count_parameters, Architecture, Branch, ConvLayer,
    DiscriminatorKind, DiscriminatorSpec, GeneratorSpec, ParamInit, ParamSpec, UpsampleStage,
};
pub use weights::{bundle_paths, random_init, BundleMeta, NamedTensor, WeightBundle};

use crate::config::VocoderConfig;
use crate::error::Result;

/// Which network a weight bundle or parameter count refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetKind {
    Generator,
    Discriminator(DiscriminatorKind),
}

impl NetKind {
    pub fn name(self) -> &'static str {
        match self {
            NetKind::Generator => "generator",
            NetKind::Discriminator(k) => k.name(),
        }
    }
}

impl std::str::FromStr for NetKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "generator" {
            Ok(NetKind::Generator)
        } else {
            Ok(NetKind::Discriminator(s.parse()?))
        }
    }
}

pub fn param_specs_for(kind: NetKind, cfg: &VocoderConfig) -> Result<Vec<ParamSpec>> {
    Ok(match kind {
        NetKind::Generator => build_generator(cfg)?.param_specs(),
        NetKind::Discriminator(k) => build_discriminator(k, cfg)?.param_specs(),
    })
}

/// Random bundle for `kind`, tagged with the config hash.
pub fn init_bundle(kind: NetKind, cfg: &VocoderConfig, seed: u64) -> Result<WeightBundle> {
    let specs = param_specs_for(kind, cfg)?;
    Ok(random_init(
        &specs,
        seed,
        BundleMeta {
            net: kind.name().to_string(),
            config_hash: cfg.hash(),
            created_by: format!("vocoscope {}", env!("CARGO_PKG_VERSION")),
            seed: None,
        },
    ))
}
