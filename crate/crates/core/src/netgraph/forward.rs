//! Forward passes for the generator and the four discriminator families.

use serde::Serialize;

use super::conv::{conv1d, conv2d, conv_transpose1d, Conv1dParams, Conv2dParams};
use super::spec::{
    Architecture, Branch, ConvLayer, DiscriminatorKind, DiscriminatorSpec, GeneratorSpec,
    PRE_POST_KERNEL,
};
use super::weights::WeightBundle;
use crate::activations::{leaky_relu_f32, Activation, LeakySlope, SnakeParams};
use crate::audio::Waveform;
use crate::config::ActivationKind;
use crate::envelope::extract_envelope_with_order;
use crate::error::{Error, Result};
use crate::spectral::{reflect_index, stft, StftPlan};
use crate::spectral::MelSpectrogram;
use crate::tensor::Tensor;

fn bias<'a>(w: &'a WeightBundle, prefix: &str) -> Result<&'a [f32]> {
    Ok(w.get(&format!("{prefix}.bias"))?.data())
}

fn apply_layer(layer: &ConvLayer, x: &Tensor, w: &WeightBundle, prefix: &str) -> Result<Tensor> {
    let weight = w.get(&format!("{prefix}.weight"))?;
    let b = Some(bias(w, prefix)?);
    match *layer {
        ConvLayer::Conv1d { stride, dilation, groups, padding, .. } => conv1d(
            x,
            weight,
            b,
            Conv1dParams { stride, dilation, groups, padding },
        ),
        ConvLayer::Conv2d { stride, padding, .. } => conv2d(
            x,
            weight,
            b,
            Conv2dParams { stride, padding, groups: 1 },
        ),
    }
}

/// Mel (mels x frames) to waveform; output length is `frames * hop`.
pub fn generator_forward(spec: &GeneratorSpec, weights: &WeightBundle, mel: &MelSpectrogram) -> Result<Waveform> {
    weights.check_against(&spec.param_specs())?;
    if mel.mels != spec.num_mels {
        return Err(Error::Shape(format!(
            "generator expects {} mel bands, got {}",
            spec.num_mels, mel.mels
        )));
    }
    if mel.frames == 0 {
        return Err(Error::Empty("mel spectrogram"));
    }
    let input = Tensor::new(
        vec![mel.mels, mel.frames],
        mel.values.iter().map(|&v| v as f32).collect(),
    )?;
    let out = generator_forward_tensor(spec, weights, &input)?;
    Waveform::new(out.data().iter().map(|&v| v as f64).collect(), spec.sample_rate)
}

fn activation_for(spec: &GeneratorSpec, weights: &WeightBundle, prefix: &str) -> Result<Activation> {
    let alpha = || Ok::<_, Error>(weights.get(&format!("{prefix}.alpha"))?.data().to_vec());
    match spec.activation {
        ActivationKind::LeakyRelu => Ok(Activation::LeakyRelu(LeakySlope::default())),
        ActivationKind::Snake => Ok(Activation::anti_aliased(SnakeParams::snake(alpha()?, spec.snake_logscale)?)),
        ActivationKind::Snakebeta => {
            let beta = weights.get(&format!("{prefix}.beta"))?.data().to_vec();
            Ok(Activation::anti_aliased(SnakeParams::snakebeta(alpha()?, beta, spec.snake_logscale)?))
        }
    }
}

fn amp_block(
    spec: &GeneratorSpec,
    weights: &WeightBundle,
    prefix: &str,
    kernel: usize,
    dilations: &[usize],
    x: &Tensor,
) -> Result<Tensor> {
    let mut x = x.clone();
    for (i, &d) in dilations.iter().enumerate() {
        let a1 = activation_for(spec, weights, &format!("{prefix}.activations.{}", 2 * i))?;
        let a2 = activation_for(spec, weights, &format!("{prefix}.activations.{}", 2 * i + 1))?;
        let c1 = format!("{prefix}.convs1.{i}");
        let c2 = format!("{prefix}.convs2.{i}");
        let mut xt = a1.apply(&x)?;
        xt = conv1d(
            &xt,
            weights.get(&format!("{c1}.weight"))?,
            Some(bias(weights, &c1)?),
            Conv1dParams { dilation: d, padding: (kernel * d - d) / 2, ..Default::default() },
        )?;
        xt = a2.apply(&xt)?;
        xt = conv1d(
            &xt,
            weights.get(&format!("{c2}.weight"))?,
            Some(bias(weights, &c2)?),
            Conv1dParams { padding: (kernel - 1) / 2, ..Default::default() },
        )?;
        for (o, v) in x.data_mut().iter_mut().zip(xt.data()) {
            *o += v;
        }
    }
    Ok(x)
}

/// Forward pass on a raw mels x frames tensor; returns `1 x (frames * hop)`.
pub fn generator_forward_tensor(spec: &GeneratorSpec, weights: &WeightBundle, mel: &Tensor) -> Result<Tensor> {
    let pad = (PRE_POST_KERNEL - 1) / 2;
    let mut x = conv1d(
        mel,
        weights.get("conv_pre.weight")?,
        Some(bias(weights, "conv_pre")?),
        Conv1dParams { padding: pad, ..Default::default() },
    )?;
    let nk = spec.blocks_per_stage();
    for (i, stage) in spec.stages.iter().enumerate() {
        if spec.activation == ActivationKind::LeakyRelu {
            x.map_inplace(leaky_relu_f32);
        }
        x = conv_transpose1d(
            &x,
            weights.get(&format!("ups.{i}.weight"))?,
            Some(bias(weights, &format!("ups.{i}"))?),
            stage.rate,
            stage.padding(),
        )?;
        let mut acc = Tensor::zeros(x.shape().to_vec());
        for (j, (&k, dils)) in spec
            .resblock_kernel_sizes
            .iter()
            .zip(&spec.resblock_dilation_sizes)
            .enumerate()
        {
            let y = amp_block(spec, weights, &format!("resblocks.{}", i * nk + j), k, dils, &x)?;
            for (a, v) in acc.data_mut().iter_mut().zip(y.data()) {
                *a += v;
            }
        }
        let inv = 1.0 / nk as f32;
        acc.map_inplace(|v| v * inv);
        x = acc;
    }
    x = activation_for(spec, weights, "activation_post")?.apply(&x)?;
    x = conv1d(
        &x,
        weights.get("conv_post.weight")?,
        Some(bias(weights, "conv_post")?),
        Conv1dParams { padding: pad, ..Default::default() },
    )?;
    x.map_inplace(f32::tanh);
    Ok(x)
}

/// Score maps (`D_k`) and per-layer feature maps (`D_k^(l)`) of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscriminatorOutput {
    pub labels: Vec<String>,
    pub score_maps: Vec<Tensor>,
    pub feature_maps: Vec<Vec<Tensor>>,
}

impl DiscriminatorOutput {
    pub fn len(&self) -> usize {
        self.score_maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.score_maps.is_empty()
    }

    /// Concatenates sub-discriminator lists, keeping order.
    pub fn extend(&mut self, other: DiscriminatorOutput) {
        self.labels.extend(other.labels);
        self.score_maps.extend(other.score_maps);
        self.feature_maps.extend(other.feature_maps);
    }
}

/// Average pooling, kernel 4, stride 2, padding 2; padded positions are
/// excluded from the mean.
pub fn avg_pool1d(x: &[f32]) -> Vec<f32> {
    const K: usize = 4;
    const S: usize = 2;
    const P: usize = 2;
    let n = x.len();
    let out_len = (n + 2 * P - K) / S + 1;
    (0..out_len)
        .map(|o| {
            let lo = (o * S).saturating_sub(P);
            let hi = (o * S + K - P).min(n);
            let window = &x[lo..hi.max(lo)];
            if window.is_empty() {
                0.0
            } else {
                window.iter().sum::<f32>() / window.len() as f32
            }
        })
        .collect()
}

/// Pads at the end by reflection to a multiple of `period`, then views the
/// signal as `(len / period) x period`, row-major.
pub fn period_reshape(x: &[f32], period: usize) -> Result<Tensor> {
    if x.is_empty() || period == 0 {
        return Err(Error::Shape("period reshape needs samples and a positive period".into()));
    }
    let n = x.len();
    let padded = n.div_ceil(period) * period;
    let data: Vec<f32> = (0..padded).map(|i| x[reflect_index(i as isize, n)]).collect();
    Tensor::new(vec![1, padded / period, period], data)
}

impl DiscriminatorSpec {
    /// Input tensor for branch `b`, before the conv stack.
    pub fn branch_input(&self, b: usize, w: &Waveform) -> Result<Tensor> {
        w.require_rate(self.sample_rate)?;
        let branch = self
            .branches
            .get(b)
            .ok_or_else(|| Error::InvalidParameter(format!("no branch {b}")))?;
        let as_f32 = |s: &[f64]| s.iter().map(|&v| v as f32).collect::<Vec<f32>>();
        match *branch {
            Branch::Envelope(mode) => {
                let env = extract_envelope_with_order(w, mode, self.filter_order)?;
                Tensor::new(vec![1, env.len()], as_f32(env.samples()))
            }
            Branch::Scale(times) => {
                if w.is_empty() {
                    return Err(Error::Empty("waveform"));
                }
                let mut x = as_f32(w.samples());
                for _ in 0..times {
                    x = avg_pool1d(&x);
                }
                Tensor::new(vec![1, x.len()], x)
            }
            Branch::Period(p) => period_reshape(&as_f32(w.samples()), p),
            Branch::Resolution(r) => {
                let spec = stft(w, &StftPlan::from_resolution(r)?)?.to_log();
                // frames x bins
                let mut data = vec![0.0f32; spec.bins * spec.frames];
                for b in 0..spec.bins {
                    for (t, &v) in spec.row(b).iter().enumerate() {
                        data[t * spec.bins + b] = v as f32;
                    }
                }
                Tensor::new(vec![1, spec.frames, spec.bins], data)
            }
        }
    }

    /// Runs branch `b`'s conv stack; returns the score map and feature maps.
    pub fn branch_forward(&self, weights: &WeightBundle, b: usize, input: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let prefix = self.branch_prefix(b);
        let mut x = input.clone();
        let mut fmaps = Vec::with_capacity(self.depth());
        for (l, layer) in self.layers.iter().enumerate() {
            x = apply_layer(layer, &x, weights, &format!("{prefix}.convs.{l}"))?;
            x.map_inplace(leaky_relu_f32);
            fmaps.push(x.clone());
        }
        x = apply_layer(&self.post, &x, weights, &format!("{prefix}.conv_post"))?;
        fmaps.push(x.clone());
        let n = x.len();
        Ok((x.reshape(vec![n])?, fmaps))
    }

    pub fn forward(&self, weights: &WeightBundle, w: &Waveform) -> Result<DiscriminatorOutput> {
        weights.check_against(&self.param_specs())?;
        let mut out = DiscriminatorOutput {
            labels: Vec::with_capacity(self.branches.len()),
            score_maps: Vec::with_capacity(self.branches.len()),
            feature_maps: Vec::with_capacity(self.branches.len()),
        };
        for (b, branch) in self.branches.iter().enumerate() {
            let input = self.branch_input(b, w)?;
            let (score, fmaps) = self.branch_forward(weights, b, &input)?;
            out.labels.push(format!("{}:{}", self.kind.name(), branch.label()));
            out.score_maps.push(score);
            out.feature_maps.push(fmaps);
        }
        Ok(out)
    }
}

fn require_kind(spec: &DiscriminatorSpec, kind: DiscriminatorKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::InvalidParameter(format!(
            "expected a {} spec, got {}",
            kind.name(),
            spec.kind.name()
        )));
    }
    Ok(())
}

/// Envelope ensemble: one scale stack per envelope mode, in mode order.
pub fn med_forward(spec: &DiscriminatorSpec, weights: &WeightBundle, w: &Waveform) -> Result<DiscriminatorOutput> {
    require_kind(spec, DiscriminatorKind::Med)?;
    spec.forward(weights, w)
}

pub fn mrd_forward(spec: &DiscriminatorSpec, weights: &WeightBundle, w: &Waveform) -> Result<DiscriminatorOutput> {
    require_kind(spec, DiscriminatorKind::Mrd)?;
    spec.forward(weights, w)
}

pub fn mpd_forward(spec: &DiscriminatorSpec, weights: &WeightBundle, w: &Waveform) -> Result<DiscriminatorOutput> {
    require_kind(spec, DiscriminatorKind::Mpd)?;
    spec.forward(weights, w)
}

pub fn msd_forward(spec: &DiscriminatorSpec, weights: &WeightBundle, w: &Waveform) -> Result<DiscriminatorOutput> {
    require_kind(spec, DiscriminatorKind::Msd)?;
    spec.forward(weights, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reshape_matches_chunking() {
        let x: Vec<f32> = (0..10).map(|v| v as f32).collect();
        let t = period_reshape(&x, 2).unwrap();
        assert_eq!(t.shape(), &[1, 5, 2]);
        let chunks: Vec<f32> = x.chunks(2).flatten().copied().collect();
        assert_eq!(t.data(), &chunks[..]);
        // 10 samples at period 3 pad with reflection: x[8], x[7]
        let t = period_reshape(&x, 3).unwrap();
        assert_eq!(t.shape(), &[1, 4, 3]);
        assert_eq!(&t.data()[9..], &[9.0, 8.0, 7.0]);
    }

    #[test]
    fn pooling_constant() {
        let x = vec![0.75f32; 37];
        let y = avg_pool1d(&x);
        assert_eq!(y.len(), 37 / 2 + 1);
        assert!(y.iter().all(|&v| (v - 0.75).abs() < 1e-7));
        assert_eq!(avg_pool1d(&[1.0, 2.0, 3.0, 4.0]), vec![1.5, 2.5, 3.5]);
    }
}
