//! Forward 1-D / 2-D convolutions over [`Tensor`]s (no batch axis).
//!
//! Weight layouts follow the usual framework conventions:
//! conv1d `[out, in / groups, k]`, conv_transpose1d `[in, out, k]`,
//! conv2d `[out, in / groups, kh, kw]`.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv1dParams {
    pub stride: usize,
    pub dilation: usize,
    pub groups: usize,
    pub padding: usize,
}

impl Default for Conv1dParams {
    fn default() -> Self {
        Self {
            stride: 1,
            dilation: 1,
            groups: 1,
            padding: 0,
        }
    }
}

pub fn conv1d_output_len(len: usize, k: usize, p: &Conv1dParams) -> Option<usize> {
    let span = p.dilation * (k - 1) + 1;
    let padded = len + 2 * p.padding;
    (padded >= span).then(|| (padded - span) / p.stride + 1)
}

fn check_bias(bias: Option<&[f32]>, out_ch: usize) -> Result<()> {
    match bias {
        Some(b) if b.len() != out_ch => Err(Error::Shape(format!(
            "bias has {} entries for {out_ch} output channels",
            b.len()
        ))),
        _ => Ok(()),
    }
}

/// Positions per im2col chunk, bounding scratch memory to about 8 MiB.
fn chunk_len(rows: usize) -> usize {
    ((2 << 20) / rows.max(1)).max(64)
}

/// `c[m x n] += a[m x k] * b[k x n]` with arbitrary strides.
#[allow(clippy::too_many_arguments)]
#[inline]
fn gemm_acc(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    (rsa, csa): (usize, usize),
    b: &[f32],
    (rsb, csb): (usize, usize),
    c: &mut [f32],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    // Every element touched must lie inside the slices.
    assert!((m - 1) * rsa + (k - 1) * csa < a.len());
    assert!((k - 1) * rsb + (n - 1) * csb < b.len());
    assert!((m - 1) * rsc + (n - 1) * csc < c.len());
    // SAFETY: the bounds above cover every index matrixmultiply reads or
    // writes, and `c` does not alias `a` or `b` (distinct borrows).
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Shared 2-D engine (1-D convolutions run with height 1): zero-padded
/// im2col over chunks of output positions, one GEMM per group and chunk.
struct Geometry {
    in_ch: usize,
    h: usize,
    w: usize,
    out_ch: usize,
    groups: usize,
    kh: usize,
    kw: usize,
    stride: (usize, usize),
    padding: (usize, usize),
    dilation: (usize, usize),
    oh: usize,
    ow: usize,
}

fn conv_engine(x: &[f32], weight: &[f32], bias: Option<&[f32]>, g: &Geometry) -> Vec<f32> {
    let positions = g.oh * g.ow;
    let in_g = g.in_ch / g.groups;
    let out_g = g.out_ch / g.groups;
    let kk = in_g * g.kh * g.kw;
    let mut out = vec![0.0f32; g.out_ch * positions];
    if let Some(b) = bias {
        for (co, row) in out.chunks_mut(positions.max(1)).enumerate() {
            row.fill(b[co]);
        }
    }
    if positions == 0 {
        return out;
    }
    let chunk = chunk_len(kk).min(positions);
    let mut col = vec![0.0f32; kk * chunk];
    let (sh, sw) = g.stride;
    let (ph, pw) = g.padding;
    let (dh, dw) = g.dilation;
    for grp in 0..g.groups {
        let mut p0 = 0;
        while p0 < positions {
            let n = chunk.min(positions - p0);
            // col[(cl, a, b), j] = x[cl, r*sh + a*dh - ph, c*sw + b*dw - pw]
            for cl in 0..in_g {
                let src = &x[(grp * in_g + cl) * g.h * g.w..(grp * in_g + cl + 1) * g.h * g.w];
                for a in 0..g.kh {
                    for b in 0..g.kw {
                        let row = (cl * g.kh + a) * g.kw + b;
                        let dst = &mut col[row * n..(row + 1) * n];
                        let mut j = 0;
                        while j < n {
                            let pos = p0 + j;
                            let (r, c0) = (pos / g.ow, pos % g.ow);
                            let seg = (g.ow - c0).min(n - j);
                            let out_seg = &mut dst[j..j + seg];
                            let ir = (r * sh + a * dh) as isize - ph as isize;
                            if ir < 0 || ir as usize >= g.h {
                                out_seg.fill(0.0);
                            } else {
                                let srow = &src[ir as usize * g.w..(ir as usize + 1) * g.w];
                                let base = (b * dw) as isize - pw as isize;
                                for (i, d) in out_seg.iter_mut().enumerate() {
                                    let ic = ((c0 + i) * sw) as isize + base;
                                    *d = if ic >= 0 && (ic as usize) < g.w { srow[ic as usize] } else { 0.0 };
                                }
                            }
                            j += seg;
                        }
                    }
                }
            }
            let a = &weight[grp * out_g * kk..(grp + 1) * out_g * kk];
            let c = &mut out[grp * out_g * positions + p0..];
            gemm_acc(out_g, kk, n, a, (kk, 1), &col[..kk * n], (n, 1), c, (positions, 1));
            p0 += n;
        }
    }
    out
}

pub fn conv1d(
    x: &Tensor,
    weight: &Tensor,
    bias: Option<&[f32]>,
    p: Conv1dParams,
) -> Result<Tensor> {
    x.require_rank(2, "conv1d input")?;
    weight.require_rank(3, "conv1d weight")?;
    let (in_ch, len) = (x.dim(0), x.dim(1));
    let (out_ch, in_per_group, k) = (weight.dim(0), weight.dim(1), weight.dim(2));
    if p.groups == 0 || p.stride == 0 || p.dilation == 0 || k == 0 {
        return Err(Error::Shape("conv1d stride, dilation, groups and kernel must be positive".into()));
    }
    if in_ch % p.groups != 0 || out_ch % p.groups != 0 || in_ch / p.groups != in_per_group {
        return Err(Error::Shape(format!(
            "conv1d: input {in_ch} ch, weight {:?}, groups {}",
            weight.shape(),
            p.groups
        )));
    }
    check_bias(bias, out_ch)?;
    let out_len = conv1d_output_len(len, k, &p).ok_or_else(|| {
        Error::Shape(format!("conv1d: input length {len} shorter than kernel span"))
    })?;
    let geo = Geometry {
        in_ch,
        h: 1,
        w: len,
        out_ch,
        groups: p.groups,
        kh: 1,
        kw: k,
        stride: (1, p.stride),
        padding: (0, p.padding),
        dilation: (1, p.dilation),
        oh: 1,
        ow: out_len,
    };
    Tensor::new(vec![out_ch, out_len], conv_engine(x.data(), weight.data(), bias, &geo))
}

/// Fractionally strided convolution; output length
/// `(len - 1) * stride - 2 * padding + k`.
pub fn conv_transpose1d(
    x: &Tensor,
    weight: &Tensor,
    bias: Option<&[f32]>,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    x.require_rank(2, "conv_transpose1d input")?;
    weight.require_rank(3, "conv_transpose1d weight")?;
    let (in_ch, len) = (x.dim(0), x.dim(1));
    let (w_in, out_ch, k) = (weight.dim(0), weight.dim(1), weight.dim(2));
    if w_in != in_ch {
        return Err(Error::Shape(format!(
            "conv_transpose1d: input {in_ch} ch, weight {:?}",
            weight.shape()
        )));
    }
    if stride == 0 || len == 0 || k == 0 {
        return Err(Error::Shape("conv_transpose1d needs positive stride, kernel and length".into()));
    }
    check_bias(bias, out_ch)?;
    let full = (len - 1) * stride + k;
    if full <= 2 * padding {
        return Err(Error::Shape("conv_transpose1d padding removes all output".into()));
    }
    let out_len = full - 2 * padding;
    let mut out = Tensor::zeros(vec![out_ch, out_len]);
    if let Some(b) = bias {
        for co in 0..out_ch {
            out.outer_mut(co).fill(b[co]);
        }
    }
    let w = weight.data();
    // One GEMM per tap: out[:, t*stride + tap - padding] += W[:, :, tap]^T x[:, t].
    for tap in 0..k {
        let offset = tap as isize - padding as isize;
        let s = stride as isize;
        let t_lo = if offset >= 0 { 0 } else { ((-offset + s - 1) / s) as usize };
        let t_hi = if offset >= out_len as isize {
            0
        } else {
            (((out_len as isize - 1 - offset) / s + 1) as usize).min(len)
        };
        if t_lo >= t_hi {
            continue;
        }
        let o0 = (t_lo as isize * s + offset) as usize;
        gemm_acc(
            out_ch,
            in_ch,
            t_hi - t_lo,
            &w[tap..],
            (k, out_ch * k),
            &x.data()[t_lo..],
            (len, 1),
            &mut out.data_mut()[o0..],
            (out_len, stride),
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dParams {
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub groups: usize,
}

impl Default for Conv2dParams {
    fn default() -> Self {
        Self {
            stride: (1, 1),
            padding: (0, 0),
            groups: 1,
        }
    }
}

pub fn conv2d(
    x: &Tensor,
    weight: &Tensor,
    bias: Option<&[f32]>,
    p: Conv2dParams,
) -> Result<Tensor> {
    x.require_rank(3, "conv2d input")?;
    weight.require_rank(4, "conv2d weight")?;
    let (in_ch, h, w) = (x.dim(0), x.dim(1), x.dim(2));
    let (out_ch, in_per_group, kh, kw) = (weight.dim(0), weight.dim(1), weight.dim(2), weight.dim(3));
    let (sh, sw) = p.stride;
    let (ph, pw) = p.padding;
    if p.groups == 0 || sh == 0 || sw == 0 || kh == 0 || kw == 0 {
        return Err(Error::Shape("conv2d stride, groups and kernel must be positive".into()));
    }
    if in_ch % p.groups != 0 || out_ch % p.groups != 0 || in_ch / p.groups != in_per_group {
        return Err(Error::Shape(format!(
            "conv2d: input {in_ch} ch, weight {:?}, groups {}",
            weight.shape(),
            p.groups
        )));
    }
    check_bias(bias, out_ch)?;
    if h + 2 * ph < kh || w + 2 * pw < kw {
        return Err(Error::Shape(format!(
            "conv2d: input {h}x{w} smaller than kernel {kh}x{kw}"
        )));
    }
    let oh = (h + 2 * ph - kh) / sh + 1;
    let ow = (w + 2 * pw - kw) / sw + 1;
    let geo = Geometry {
        in_ch,
        h,
        w,
        out_ch,
        groups: p.groups,
        kh,
        kw,
        stride: p.stride,
        padding: p.padding,
        dilation: (1, 1),
        oh,
        ow,
    };
    Tensor::new(vec![out_ch, oh, ow], conv_engine(x.data(), weight.data(), bias, &geo))
}
