//! Architecture descriptions derived from a [`VocoderConfig`]. Parameter
//! counts come from these descriptions alone, no weights needed.

use serde::{Deserialize, Serialize};

use crate::config::{ActivationKind, Resolution, VocoderConfig};
use crate::envelope::{EnvelopeMode, DEFAULT_FILTER_ORDER};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamInit {
    Normal,
    /// Snake parameter stored as a logarithm.
    SnakeLog,
    SnakeLinear,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: ParamInit,
}

impl ParamSpec {
    fn normal(name: String, shape: Vec<usize>) -> Self {
        Self {
            name,
            shape,
            init: ParamInit::Normal,
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Anything whose trainable tensors can be listed.
pub trait Architecture {
    fn param_specs(&self) -> Vec<ParamSpec>;
}

pub fn count_parameters(arch: &dyn Architecture) -> usize {
    arch.param_specs().iter().map(ParamSpec::numel).sum()
}

/// One convolution layer with bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvLayer {
    Conv1d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        dilation: usize,
        groups: usize,
        padding: usize,
    },
    Conv2d {
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
    },
}

impl ConvLayer {
    pub fn conv1d(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, groups: usize, padding: usize) -> Self {
        ConvLayer::Conv1d {
            in_ch,
            out_ch,
            kernel,
            stride,
            dilation: 1,
            groups,
            padding,
        }
    }

    pub fn conv2d(in_ch: usize, out_ch: usize, kernel: (usize, usize), stride: (usize, usize), padding: (usize, usize)) -> Self {
        ConvLayer::Conv2d {
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
        }
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        match *self {
            ConvLayer::Conv1d { in_ch, out_ch, kernel, groups, .. } => vec![out_ch, in_ch / groups, kernel],
            ConvLayer::Conv2d { in_ch, out_ch, kernel, .. } => vec![out_ch, in_ch, kernel.0, kernel.1],
        }
    }

    pub fn out_channels(&self) -> usize {
        match *self {
            ConvLayer::Conv1d { out_ch, .. } | ConvLayer::Conv2d { out_ch, .. } => out_ch,
        }
    }

    pub fn params(&self, prefix: &str) -> Vec<ParamSpec> {
        vec![
            ParamSpec::normal(format!("{prefix}.weight"), self.weight_shape()),
            ParamSpec::normal(format!("{prefix}.bias"), vec![self.out_channels()]),
        ]
    }
}

impl Architecture for ConvLayer {
    fn param_specs(&self) -> Vec<ParamSpec> {
        self.params("conv")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpsampleStage {
    pub in_channels: usize,
    pub out_channels: usize,
    pub rate: usize,
    pub kernel: usize,
}

impl UpsampleStage {
    /// Padding that makes the transposed conv multiply length by `rate`.
    pub fn padding(&self) -> usize {
        (self.kernel - self.rate) / 2
    }
}

pub const PRE_POST_KERNEL: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub num_mels: usize,
    pub initial_channel: usize,
    pub stages: Vec<UpsampleStage>,
    pub resblock_kernel_sizes: Vec<usize>,
    pub resblock_dilation_sizes: Vec<Vec<usize>>,
    pub activation: ActivationKind,
    pub snake_logscale: bool,
    pub sample_rate: u32,
}

/// Upsampling stages with halving channel widths, each followed by parallel
/// AMP blocks (one per resblock kernel) whose outputs are averaged.
pub fn build_generator(cfg: &VocoderConfig) -> Result<GeneratorSpec> {
    cfg.validate()?;
    if cfg.use_spectral_norm {
        return Err(Error::Config("spectral norm is not supported".into()));
    }
    if cfg.resblock_kernel_sizes.is_empty() {
        return Err(Error::Config("generator needs at least one resblock kernel".into()));
    }
    let mut stages = Vec::with_capacity(cfg.upsample_rates.len());
    let mut ch = cfg.upsample_initial_channel;
    for (&rate, &kernel) in cfg.upsample_rates.iter().zip(&cfg.upsample_kernel_sizes) {
        if kernel < rate || (kernel - rate) % 2 != 0 {
            return Err(Error::Config(format!(
                "upsample kernel {kernel} must be >= rate {rate} with even difference"
            )));
        }
        let out = ch / 2;
        if out == 0 {
            return Err(Error::Config(format!(
                "upsample_initial_channel {} too small for {} stages",
                cfg.upsample_initial_channel,
                cfg.upsample_rates.len()
            )));
        }
        stages.push(UpsampleStage {
            in_channels: ch,
            out_channels: out,
            rate,
            kernel,
        });
        ch = out;
    }
    for &k in &cfg.resblock_kernel_sizes {
        if k % 2 == 0 {
            return Err(Error::Config(format!("resblock kernel {k} must be odd")));
        }
    }
    Ok(GeneratorSpec {
        num_mels: cfg.num_mels,
        initial_channel: cfg.upsample_initial_channel,
        stages,
        resblock_kernel_sizes: cfg.resblock_kernel_sizes.clone(),
        resblock_dilation_sizes: cfg.resblock_dilation_sizes.clone(),
        activation: cfg.activation,
        snake_logscale: cfg.snake_logscale,
        sample_rate: cfg.sampling_rate,
    })
}

impl GeneratorSpec {
    pub fn upsample_factor(&self) -> usize {
        self.stages.iter().map(|s| s.rate).product()
    }

    /// Channel width after the pre-conv and after each stage.
    pub fn channel_widths(&self) -> Vec<usize> {
        std::iter::once(self.initial_channel)
            .chain(self.stages.iter().map(|s| s.out_channels))
            .collect()
    }

    pub fn final_channels(&self) -> usize {
        self.stages.last().map_or(self.initial_channel, |s| s.out_channels)
    }

    pub fn blocks_per_stage(&self) -> usize {
        self.resblock_kernel_sizes.len()
    }

    fn activation_params(&self, prefix: &str, channels: usize) -> Vec<ParamSpec> {
        let init = if self.snake_logscale {
            ParamInit::SnakeLog
        } else {
            ParamInit::SnakeLinear
        };
        let mk = |n: &str| ParamSpec {
            name: format!("{prefix}.{n}"),
            shape: vec![channels],
            init,
        };
        match self.activation {
            ActivationKind::Snake => vec![mk("alpha")],
            ActivationKind::Snakebeta => vec![mk("alpha"), mk("beta")],
            ActivationKind::LeakyRelu => vec![],
        }
    }
}

impl Architecture for GeneratorSpec {
    fn param_specs(&self) -> Vec<ParamSpec> {
        let mut p = ConvLayer::conv1d(self.num_mels, self.initial_channel, PRE_POST_KERNEL, 1, 1, 3)
            .params("conv_pre");
        for (i, s) in self.stages.iter().enumerate() {
            p.push(ParamSpec::normal(
                format!("ups.{i}.weight"),
                vec![s.in_channels, s.out_channels, s.kernel],
            ));
            p.push(ParamSpec::normal(format!("ups.{i}.bias"), vec![s.out_channels]));
        }
        let nk = self.blocks_per_stage();
        for (i, s) in self.stages.iter().enumerate() {
            let c = s.out_channels;
            for (j, (&k, dils)) in self
                .resblock_kernel_sizes
                .iter()
                .zip(&self.resblock_dilation_sizes)
                .enumerate()
            {
                let rb = format!("resblocks.{}", i * nk + j);
                for (d_idx, _) in dils.iter().enumerate() {
                    p.extend(ConvLayer::conv1d(c, c, k, 1, 1, 0).params(&format!("{rb}.convs1.{d_idx}")));
                }
                for (d_idx, _) in dils.iter().enumerate() {
                    p.extend(ConvLayer::conv1d(c, c, k, 1, 1, 0).params(&format!("{rb}.convs2.{d_idx}")));
                }
                for a in 0..2 * dils.len() {
                    p.extend(self.activation_params(&format!("{rb}.activations.{a}"), c));
                }
            }
        }
        let c = self.final_channels();
        p.extend(self.activation_params("activation_post", c));
        p.extend(ConvLayer::conv1d(c, 1, PRE_POST_KERNEL, 1, 1, 3).params("conv_post"));
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscriminatorKind {
    Med,
    Mrd,
    Mpd,
    Msd,
}

impl DiscriminatorKind {
    pub fn name(self) -> &'static str {
        match self {
            DiscriminatorKind::Med => "med",
            DiscriminatorKind::Mrd => "mrd",
            DiscriminatorKind::Mpd => "mpd",
            DiscriminatorKind::Msd => "msd",
        }
    }
}

impl std::str::FromStr for DiscriminatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "med" => Ok(DiscriminatorKind::Med),
            "mrd" => Ok(DiscriminatorKind::Mrd),
            "mpd" => Ok(DiscriminatorKind::Mpd),
            "msd" => Ok(DiscriminatorKind::Msd),
            other => Err(Error::InvalidParameter(format!("unknown discriminator `{other}`"))),
        }
    }
}

/// What a sub-discriminator looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Envelope(EnvelopeMode),
    Resolution(Resolution),
    Period(usize),
    /// Input average-pooled this many times.
    Scale(usize),
}

impl Branch {
    pub fn label(&self) -> String {
        match self {
            Branch::Envelope(m) => format!("envelope:{m}"),
            Branch::Resolution(r) => format!("resolution:{}x{}x{}", r.n_fft, r.hop, r.win),
            Branch::Period(p) => format!("period:{p}"),
            Branch::Scale(s) => format!("scale:{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorSpec {
    pub kind: DiscriminatorKind,
    pub branches: Vec<Branch>,
    /// Conv stack shared in shape (not weights) by all branches.
    pub layers: Vec<ConvLayer>,
    pub post: ConvLayer,
    pub sample_rate: u32,
    pub filter_order: usize,
}

fn scaled(ch: usize, mult: f64) -> usize {
    ((ch as f64 * mult).round() as usize).max(1)
}

/// The scale-discriminator stack: kernel-15 head, grouped strided
/// kernel-41 convs, kernel-5 tail.
pub fn scale_stack() -> (Vec<ConvLayer>, ConvLayer) {
    (
        vec![
            ConvLayer::conv1d(1, 128, 15, 1, 1, 7),
            ConvLayer::conv1d(128, 128, 41, 2, 4, 20),
            ConvLayer::conv1d(128, 256, 41, 2, 16, 20),
            ConvLayer::conv1d(256, 512, 41, 4, 16, 20),
            ConvLayer::conv1d(512, 1024, 41, 4, 16, 20),
            ConvLayer::conv1d(1024, 1024, 41, 1, 16, 20),
            ConvLayer::conv1d(1024, 1024, 5, 1, 1, 2),
        ],
        ConvLayer::conv1d(1024, 1, 3, 1, 1, 1),
    )
}

pub fn period_stack(mult: f64) -> (Vec<ConvLayer>, ConvLayer) {
    let widths = [1, scaled(32, mult), scaled(128, mult), scaled(512, mult), scaled(1024, mult)];
    let mut layers: Vec<ConvLayer> = widths
        .windows(2)
        .map(|w| ConvLayer::conv2d(w[0], w[1], (5, 1), (3, 1), (2, 0)))
        .collect();
    let top = widths[4];
    layers.push(ConvLayer::conv2d(top, top, (5, 1), (1, 1), (2, 0)));
    (layers, ConvLayer::conv2d(top, 1, (3, 1), (1, 1), (1, 0)))
}

/// Resolution stack over a frames x bins log spectrogram; the strided
/// layers halve the frequency axis and keep frame resolution.
pub fn resolution_stack(mult: f64) -> (Vec<ConvLayer>, ConvLayer) {
    let c = scaled(32, mult);
    (
        vec![
            ConvLayer::conv2d(1, c, (3, 9), (1, 1), (1, 4)),
            ConvLayer::conv2d(c, c, (3, 9), (1, 2), (1, 4)),
            ConvLayer::conv2d(c, c, (3, 9), (1, 2), (1, 4)),
            ConvLayer::conv2d(c, c, (3, 9), (1, 2), (1, 4)),
            ConvLayer::conv2d(c, c, (3, 3), (1, 1), (1, 1)),
        ],
        ConvLayer::conv2d(c, 1, (3, 3), (1, 1), (1, 1)),
    )
}

pub fn build_discriminator(kind: DiscriminatorKind, cfg: &VocoderConfig) -> Result<DiscriminatorSpec> {
    cfg.validate()?;
    if cfg.use_spectral_norm {
        return Err(Error::Config("spectral norm is not supported".into()));
    }
    let mult = cfg.discriminator_channel_mult;
    let (branches, (layers, post)) = match kind {
        DiscriminatorKind::Med => (
            EnvelopeMode::ALL.iter().map(|&m| Branch::Envelope(m)).collect(),
            scale_stack(),
        ),
        DiscriminatorKind::Mrd => (
            cfg.resolutions.iter().map(|&r| Branch::Resolution(r)).collect(),
            resolution_stack(mult),
        ),
        DiscriminatorKind::Mpd => (
            cfg.mpd_reshapes.iter().map(|&p| Branch::Period(p)).collect(),
            period_stack(mult),
        ),
        DiscriminatorKind::Msd => ((0..3).map(Branch::Scale).collect(), scale_stack()),
    };
    Ok(DiscriminatorSpec {
        kind,
        branches,
        layers,
        post,
        sample_rate: cfg.sampling_rate,
        filter_order: DEFAULT_FILTER_ORDER,
    })
}

impl DiscriminatorSpec {
    pub fn branch_prefix(&self, b: usize) -> String {
        format!("discriminators.{b}")
    }

    pub fn branch_params(&self, b: usize) -> Vec<ParamSpec> {
        let prefix = self.branch_prefix(b);
        let mut p: Vec<ParamSpec> = self
            .layers
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| layer.params(&format!("{prefix}.convs.{l}")))
            .collect();
        p.extend(self.post.params(&format!("{prefix}.conv_post")));
        p
    }

    /// Feature maps per branch: one per conv layer including the post conv.
    pub fn depth(&self) -> usize {
        self.layers.len() + 1
    }
}

impl Architecture for DiscriminatorSpec {
    fn param_specs(&self) -> Vec<ParamSpec> {
        (0..self.branches.len()).flat_map(|b| self.branch_params(b)).collect()
    }
}
