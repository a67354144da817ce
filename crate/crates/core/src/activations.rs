//! Snake, SnakeBeta and Leaky ReLU with their analytic derivatives, and the
//! 2x oversampled anti-aliased activation used inside AMP blocks.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Negative slope used by every Leaky ReLU in the discriminators.
pub const LRELU_SLOPE: f64 = 0.1;

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// `x + sin^2(alpha x) / alpha`
pub fn snake(x: f64, alpha: f64) -> Result<f64> {
    require_positive("alpha", alpha)?;
    let s = (alpha * x).sin();
    Ok(x + s * s / alpha)
}

/// `1 + sin(2 alpha x)`
pub fn snake_derivative(x: f64, alpha: f64) -> Result<f64> {
    require_positive("alpha", alpha)?;
    Ok(1.0 + (2.0 * alpha * x).sin())
}

/// `x + sin^2(alpha x) / beta`; equals [`snake`] when `beta == alpha`.
pub fn snakebeta(x: f64, alpha: f64, beta: f64) -> Result<f64> {
    require_positive("alpha", alpha)?;
    require_positive("beta", beta)?;
    let s = (alpha * x).sin();
    Ok(x + s * s / beta)
}

/// Partial derivatives of [`snakebeta`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnakeBetaGrad {
    pub dx: f64,
    pub dalpha: f64,
    pub dbeta: f64,
}

pub fn snakebeta_grad(x: f64, alpha: f64, beta: f64) -> Result<SnakeBetaGrad> {
    require_positive("alpha", alpha)?;
    require_positive("beta", beta)?;
    let s = (alpha * x).sin();
    let s2 = (2.0 * alpha * x).sin();
    Ok(SnakeBetaGrad {
        dx: 1.0 + alpha / beta * s2,
        dalpha: x * s2 / beta,
        dbeta: -s * s / (beta * beta),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakySlope(f64);

impl LeakySlope {
    pub fn new(slope: f64) -> Result<Self> {
        if slope > 0.0 && slope < 1.0 {
            Ok(Self(slope))
        } else {
            Err(Error::InvalidParameter(format!(
                "leaky slope must lie in (0, 1), got {slope}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for LeakySlope {
    fn default() -> Self {
        Self(LRELU_SLOPE)
    }
}

pub fn leaky_relu(x: f64, slope: LeakySlope) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope.0 * x
    }
}

pub fn leaky_relu_derivative(x: f64, slope: LeakySlope) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        slope.0
    }
}

#[inline]
pub(crate) fn leaky_relu_f32(x: f32) -> f32 {
    if x >= 0.0 {
        x
    } else {
        LRELU_SLOPE as f32 * x
    }
}

/// Per-channel Snake parameters. With `beta == None` the activation is plain
/// Snake, otherwise SnakeBeta. When `logscale` is set the stored values are
/// logarithms and are exponentiated on use.
#[derive(Debug, Clone, PartialEq)]
pub struct SnakeParams {
    pub alpha: Vec<f32>,
    pub beta: Option<Vec<f32>>,
    pub logscale: bool,
}

impl SnakeParams {
    pub fn snake(alpha: Vec<f32>, logscale: bool) -> Result<Self> {
        let p = Self {
            alpha,
            beta: None,
            logscale,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn snakebeta(alpha: Vec<f32>, beta: Vec<f32>, logscale: bool) -> Result<Self> {
        let p = Self {
            alpha,
            beta: Some(beta),
            logscale,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn channels(&self) -> usize {
        self.alpha.len()
    }

    fn validate(&self) -> Result<()> {
        if let Some(b) = &self.beta {
            if b.len() != self.alpha.len() {
                return Err(Error::Shape(format!(
                    "alpha has {} channels, beta {}",
                    self.alpha.len(),
                    b.len()
                )));
            }
        }
        for c in 0..self.channels() {
            let (a, b) = self.effective(c);
            require_positive("alpha", a as f64)?;
            require_positive("beta", b as f64)?;
        }
        Ok(())
    }

    /// Effective `(alpha, beta)` for channel `c`.
    pub fn effective(&self, c: usize) -> (f32, f32) {
        let decode = |v: f32| if self.logscale { v.exp() } else { v };
        let alpha = decode(self.alpha[c]);
        let beta = self.beta.as_ref().map_or(alpha, |b| decode(b[c]));
        (alpha, beta)
    }

    fn apply_row(&self, c: usize, row: &mut [f32]) {
        let (alpha, beta) = self.effective(c);
        let inv_beta = 1.0 / beta;
        for v in row {
            let s = (alpha * *v).sin();
            *v += inv_beta * s * s;
        }
    }
}

/// Taps of the Kaiser-windowed sinc low-pass used for 2x resampling.
pub const AA_TAPS: usize = 12;
const AA_RATIO: usize = 2;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc low-pass, normalised to unit DC gain.
///
/// `cutoff` and `half_width` are in cycles per sample.
pub fn kaiser_sinc_filter(cutoff: f64, half_width: f64, taps: usize) -> Vec<f64> {
    let even = taps.is_multiple_of(2);
    let half = (taps / 2) as f64;
    let delta_f = 4.0 * half_width;
    let atten = 2.285 * (half - 1.0) * PI * delta_f + 7.95;
    let beta = if atten > 50.0 {
        0.1102 * (atten - 8.7)
    } else if atten >= 21.0 {
        0.5842 * (atten - 21.0).powf(0.4) + 0.07886 * (atten - 21.0)
    } else {
        0.0
    };
    let denom = bessel_i0(beta);
    let m = (taps - 1) as f64;
    let mut filt: Vec<f64> = (0..taps)
        .map(|n| {
            let r = if taps > 1 { 2.0 * n as f64 / m - 1.0 } else { 0.0 };
            let window = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom;
            let t = n as f64 - half + if even { 0.5 } else { 0.0 };
            let arg = 2.0 * cutoff * t;
            let sinc = if arg == 0.0 { 1.0 } else { (PI * arg).sin() / (PI * arg) };
            2.0 * cutoff * window * sinc
        })
        .collect();
    let sum: f64 = filt.iter().sum();
    filt.iter_mut().for_each(|v| *v /= sum);
    filt
}

/// 2x zero-stuffing upsampler and decimator sharing one low-pass.
#[derive(Debug, Clone)]
pub struct AntiAliasResampler {
    filter: Vec<f32>,
}

impl Default for AntiAliasResampler {
    fn default() -> Self {
        let ratio = AA_RATIO as f64;
        let filter = kaiser_sinc_filter(0.5 / ratio, 0.6 / ratio, AA_TAPS)
            .into_iter()
            .map(|v| v as f32)
            .collect();
        Self { filter }
    }
}

impl AntiAliasResampler {
    pub fn taps(&self) -> &[f32] {
        &self.filter
    }

    /// Replicate-padded transposed convolution with gain 2; `2T` samples out.
    pub fn upsample(&self, x: &[f32], out: &mut Vec<f32>) {
        let k = self.filter.len();
        let r = AA_RATIO;
        let pad = k / r - 1;
        let trim_left = pad * r + (k - r) / 2;
        let n = x.len();
        out.clear();
        out.resize(n * r, 0.0);
        let at = |i: isize| x[i.clamp(0, n as isize - 1) as usize];
        // Full output index j = i*r + tap, padded input index i = src + pad.
        for (o, dst) in out.iter_mut().enumerate() {
            let j = o + trim_left;
            let mut acc = 0.0f32;
            let mut tap = j % r;
            while tap < k {
                let i = (j - tap) / r;
                acc += at(i as isize - pad as isize) * self.filter[tap];
                tap += r;
            }
            *dst = acc * r as f32;
        }
    }

    /// Replicate-padded low-pass then keep every second sample; `len / 2` out.
    pub fn downsample(&self, x: &[f32], out: &mut Vec<f32>) {
        let k = self.filter.len();
        let pad_left = k / 2 - 1;
        let n = x.len();
        let m = n / AA_RATIO;
        out.clear();
        out.reserve(m);
        for o in 0..m {
            let start = (o * AA_RATIO) as isize - pad_left as isize;
            let mut acc = 0.0f32;
            if start >= 0 && start as usize + k <= n {
                let s = start as usize;
                for (xv, fv) in x[s..s + k].iter().zip(&self.filter) {
                    acc += xv * fv;
                }
            } else {
                for (t, fv) in self.filter.iter().enumerate() {
                    let idx = (start + t as isize).clamp(0, n as isize - 1) as usize;
                    acc += x[idx] * fv;
                }
            }
            out.push(acc);
        }
    }
}

/// Channel-wise activation, applied either directly or through the
/// anti-aliased 2x path.
#[derive(Debug, Clone)]
pub enum Activation {
    Snake {
        params: SnakeParams,
        resampler: AntiAliasResampler,
    },
    LeakyRelu(LeakySlope),
}

impl Activation {
    pub fn anti_aliased(params: SnakeParams) -> Self {
        Activation::Snake {
            params,
            resampler: AntiAliasResampler::default(),
        }
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Activation::Snake { params, resampler } => {
                // Clamped padding keeps very short sequences (1-frame mels)
                // well defined inside the generator.
                antialiased_with(x, params, resampler, 1)
            }
            Activation::LeakyRelu(slope) => {
                let s = slope.get() as f32;
                let mut y = x.clone();
                y.map_inplace(|v| if v >= 0.0 { v } else { s * v });
                Ok(y)
            }
        }
    }
}

/// Upsample 2x, apply per-channel snake/snakebeta, low-pass and decimate.
/// `x` is channels x time; the output has the same shape.
pub fn antialiased_activation(x: &Tensor, params: &SnakeParams) -> Result<Tensor> {
    antialiased_with(x, params, &AntiAliasResampler::default(), AA_TAPS)
}

fn antialiased_with(
    x: &Tensor,
    params: &SnakeParams,
    rs: &AntiAliasResampler,
    min_len: usize,
) -> Result<Tensor> {
    x.require_rank(2, "antialiased activation")?;
    let (channels, time) = (x.dim(0), x.dim(1));
    if channels != params.channels() {
        return Err(Error::Shape(format!(
            "activation has {} channels, input {channels}",
            params.channels()
        )));
    }
    if time < min_len {
        return Err(Error::InvalidParameter(format!(
            "anti-aliased activation needs at least {min_len} samples, got {time}"
        )));
    }
    let mut out = Tensor::zeros(vec![channels, time]);
    let mut up = Vec::new();
    let mut down = Vec::new();
    for c in 0..channels {
        rs.upsample(x.outer(c), &mut up);
        params.apply_row(c, &mut up);
        rs.downsample(&up, &mut down);
        out.outer_mut(c).copy_from_slice(&down);
    }
    Ok(out)
}

/// Pointwise snake/snakebeta without resampling.
pub fn direct_activation(x: &Tensor, params: &SnakeParams) -> Result<Tensor> {
    x.require_rank(2, "activation")?;
    if x.dim(0) != params.channels() {
        return Err(Error::Shape("channel count mismatch".into()));
    }
    let mut y = x.clone();
    for c in 0..params.channels() {
        params.apply_row(c, y.outer_mut(c));
    }
    Ok(y)
}

/// Activation functions covered by [`gradcheck`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradOp {
    Snake,
    Snakebeta,
    LeakyRelu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub op: GradOp,
    pub n_points: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub const GRADCHECK_TOLERANCE: f64 = 1e-6;

fn central_difference(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-5 * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

/// Compares analytic derivatives against central differences at `n` random
/// points, x in [-5, 5] and parameters in [0.1, 5].
pub fn gradcheck(op: GradOp, n: usize, seed: u64) -> GradcheckReport {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel_err = 0.0f64;
    let mut points = 0;
    while points < n {
        let x: f64 = rng.random_range(-5.0..5.0);
        let alpha: f64 = rng.random_range(0.1..5.0);
        let beta: f64 = rng.random_range(0.1..5.0);
        let errs = match op {
            GradOp::Snake => {
                let analytic = snake_derivative(x, alpha).expect("alpha > 0");
                let numeric = central_difference(|v| snake(v, alpha).expect("alpha > 0"), x);
                vec![rel_err(analytic, numeric)]
            }
            GradOp::Snakebeta => {
                let g = snakebeta_grad(x, alpha, beta).expect("positive params");
                let f = |x: f64, a: f64, b: f64| snakebeta(x, a, b).expect("positive params");
                vec![
                    rel_err(g.dx, central_difference(|v| f(v, alpha, beta), x)),
                    rel_err(g.dalpha, central_difference(|v| f(x, v, beta), alpha)),
                    rel_err(g.dbeta, central_difference(|v| f(x, alpha, v), beta)),
                ]
            }
            GradOp::LeakyRelu => {
                if x.abs() < 1e-4 {
                    continue;
                }
                let slope = LeakySlope::default();
                let analytic = leaky_relu_derivative(x, slope);
                let numeric = central_difference(|v| leaky_relu(v, slope), x);
                vec![rel_err(analytic, numeric)]
            }
        };
        max_rel_err = errs.into_iter().fold(max_rel_err, f64::max);
        points += 1;
    }
    GradcheckReport {
        op,
        n_points: n,
        max_rel_err,
        tolerance: GRADCHECK_TOLERANCE,
        pass: max_rel_err < GRADCHECK_TOLERANCE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snake_values() {
        assert_eq!(snake(0.0, 1.0).unwrap(), 0.0);
        // sin^2(pi/2) = 1
        assert!((snake(PI / 2.0, 1.0).unwrap() - (PI / 2.0 + 1.0)).abs() < 1e-15);
        assert!(snake(1.0, 0.0).is_err());
        assert!(snake(1.0, -2.0).is_err());
    }

    #[test]
    fn snake_residual_has_period_pi_over_alpha() {
        for &alpha in &[0.3, 1.0, 2.7] {
            let period = PI / alpha;
            for i in 0..200 {
                let x = -3.0 + i as f64 * 0.037;
                let a = snake(x, alpha).unwrap() - x;
                let b = snake(x + period, alpha).unwrap() - (x + period);
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn snake_derivative_values() {
        assert_eq!(snake_derivative(0.0, 1.3).unwrap(), 1.0);
        for &alpha in &[0.5, 1.0, 3.0] {
            // sin(2 alpha x) = -1 at x = -pi / (4 alpha)
            let x = -PI / (4.0 * alpha);
            assert!(snake_derivative(x, alpha).unwrap().abs() < 1e-9);
        }
        let max = (0..100_000)
            .map(|i| snake_derivative(i as f64 * 1e-4, 1.0).unwrap())
            .fold(f64::MIN, f64::max);
        assert!((max - 2.0).abs() < 1e-8);
        assert!(snake_derivative(1.0, 0.0).is_err());
    }

    #[test]
    fn snake_derivative_nonnegative_sweep() {
        for &alpha in &[0.1, 1.0, 7.5] {
            for i in 0..20_000 {
                let x = -10.0 + i as f64 * 1e-3;
                assert!(snake_derivative(x, alpha).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn snakebeta_values() {
        for i in 0..50 {
            let x = -4.0 + 0.17 * i as f64;
            assert_eq!(snakebeta(x, 1.7, 1.7).unwrap(), snake(x, 1.7).unwrap());
        }
        assert_eq!(snakebeta(0.0, 0.4, 2.0).unwrap(), 0.0);
        assert!((snakebeta(PI / 2.0, 1.0, 2.0).unwrap() - (PI / 2.0 + 0.5)).abs() < 1e-15);
        assert!(snakebeta(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn leaky_relu_values() {
        let s = LeakySlope::new(0.1).unwrap();
        assert_eq!(leaky_relu(2.0, s), 2.0);
        assert!((leaky_relu(-2.0, s) + 0.2).abs() < 1e-15);
        assert!((leaky_relu_derivative(-1.0, s) - 0.1).abs() < 1e-15);
        let fd = (leaky_relu(-1.0 + 1e-6, s) - leaky_relu(-1.0 - 1e-6, s)) / 2e-6;
        assert!((fd - 0.1).abs() < 1e-9);
        assert!(LeakySlope::new(1.0).is_err());
        assert!(LeakySlope::new(0.0).is_err());
    }

    #[test]
    fn gradcheck_all_ops() {
        for op in [GradOp::Snake, GradOp::Snakebeta, GradOp::LeakyRelu] {
            let r = gradcheck(op, 1000, 42);
            assert!(r.pass, "{op:?}: {}", r.max_rel_err);
            assert_eq!(r.n_points, 1000);
        }
    }

    #[test]
    fn kaiser_filter_is_symmetric_lowpass() {
        let f = kaiser_sinc_filter(0.25, 0.3, 12);
        assert_eq!(f.len(), 12);
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..6 {
            assert!((f[i] - f[11 - i]).abs() < 1e-15);
        }
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        // I0(1) = 1.2660658777520082
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_2).abs() < 1e-14);
    }

    fn unit_params(c: usize) -> SnakeParams {
        SnakeParams::snakebeta(vec![0.0; c], vec![0.0; c], true).unwrap()
    }

    #[test]
    fn antialiased_shapes_and_zero() {
        let p = unit_params(3);
        let x = Tensor::zeros(vec![3, 40]);
        let y = antialiased_activation(&x, &p).unwrap();
        assert_eq!(y.shape(), &[3, 40]);
        assert!(y.data().iter().all(|&v| v == 0.0));
        for (c, t) in [(1, 12), (4, 13), (2, 257)] {
            let y = antialiased_activation(&Tensor::zeros(vec![c, t]), &unit_params(c)).unwrap();
            assert_eq!(y.shape(), &[c, t]);
        }
        assert!(antialiased_activation(&Tensor::zeros(vec![1, 11]), &unit_params(1)).is_err());
        assert!(antialiased_activation(&Tensor::zeros(vec![2, 40]), &unit_params(1)).is_err());
    }

    #[test]
    fn antialiased_is_transparent_in_band() {
        let t = 4096;
        let freq = 0.05 * 0.5; // 5% of Nyquist, cycles per sample
        let x: Vec<f32> = (0..t)
            .map(|n| (0.8 * (2.0 * PI * freq * n as f64).sin()) as f32)
            .collect();
        let x = Tensor::new(vec![1, t], x).unwrap();
        let p = SnakeParams::snake(vec![1.0], false).unwrap();
        let aa = antialiased_activation(&x, &p).unwrap();
        let direct = direct_activation(&x, &p).unwrap();
        let (lo, hi) = (64, t - 64);
        let err: f64 = (lo..hi)
            .map(|i| (aa.data()[i] - direct.data()[i]) as f64)
            .map(|d| d * d)
            .sum();
        let energy: f64 = (lo..hi).map(|i| (direct.data()[i] as f64).powi(2)).sum();
        let rel = (err / energy).sqrt();
        assert!(rel < 0.01, "{rel}");
    }

    #[test]
    fn logscale_params_exponentiate() {
        let p = SnakeParams::snakebeta(vec![0.0, 1.0f32.ln()], vec![2.0f32.ln(), 0.0], true).unwrap();
        assert_eq!(p.effective(0), (1.0, 2.0f32.ln().exp()));
        assert!(SnakeParams::snake(vec![0.0], false).is_err());
        assert!(SnakeParams::snakebeta(vec![1.0], vec![1.0, 1.0], false).is_err());
    }
}
