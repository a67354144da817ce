//! Convolution kernels against brute-force nested-loop references.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vocoscope::netgraph::{conv1d, conv2d, conv_transpose1d, Conv1dParams, Conv2dParams};
use vocoscope::Tensor;

/// Relative to the output magnitude (floor 1): kernels run in f32.
const TOL: f64 = 1e-6;

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap()
}

fn naive_conv1d(x: &Tensor, w: &Tensor, b: &[f32], p: Conv1dParams) -> Vec<f64> {
    let (cin, len) = (x.dim(0), x.dim(1));
    let (cout, cpg, k) = (w.dim(0), w.dim(1), w.dim(2));
    let opg = cout / p.groups;
    let span = p.dilation * (k - 1) + 1;
    let out_len = (len + 2 * p.padding - span) / p.stride + 1;
    assert_eq!(cin, cpg * p.groups);
    let mut out = vec![0.0f64; cout * out_len];
    for co in 0..cout {
        let g = co / opg;
        for t in 0..out_len {
            let mut acc = b[co] as f64;
            for cl in 0..cpg {
                for tap in 0..k {
                    let i = (t * p.stride + tap * p.dilation) as isize - p.padding as isize;
                    if i >= 0 && (i as usize) < len {
                        let xv = x.data()[(g * cpg + cl) * len + i as usize] as f64;
                        let wv = w.data()[(co * cpg + cl) * k + tap] as f64;
                        acc += xv * wv;
                    }
                }
            }
            out[co * out_len + t] = acc;
        }
    }
    out
}

fn naive_conv_transpose1d(x: &Tensor, w: &Tensor, b: &[f32], stride: usize, padding: usize) -> Vec<f64> {
    let (cin, len) = (x.dim(0), x.dim(1));
    let (cout, k) = (w.dim(1), w.dim(2));
    let out_len = (len - 1) * stride + k - 2 * padding;
    let mut out: Vec<f64> = (0..cout * out_len).map(|i| b[i / out_len] as f64).collect();
    for ci in 0..cin {
        for t in 0..len {
            for co in 0..cout {
                for tap in 0..k {
                    let o = (t * stride + tap) as isize - padding as isize;
                    if o >= 0 && (o as usize) < out_len {
                        out[co * out_len + o as usize] +=
                            x.data()[ci * len + t] as f64 * w.data()[(ci * cout + co) * k + tap] as f64;
                    }
                }
            }
        }
    }
    out
}

fn naive_conv2d(x: &Tensor, w: &Tensor, b: &[f32], p: Conv2dParams) -> Vec<f64> {
    let (h, wd) = (x.dim(1), x.dim(2));
    let (cout, cpg, kh, kw) = (w.dim(0), w.dim(1), w.dim(2), w.dim(3));
    let opg = cout / p.groups;
    let oh = (h + 2 * p.padding.0 - kh) / p.stride.0 + 1;
    let ow = (wd + 2 * p.padding.1 - kw) / p.stride.1 + 1;
    let mut out = vec![0.0; cout * oh * ow];
    for co in 0..cout {
        let g = co / opg;
        for r in 0..oh {
            for c in 0..ow {
                let mut acc = b[co] as f64;
                for cl in 0..cpg {
                    for a in 0..kh {
                        for bb in 0..kw {
                            let ir = (r * p.stride.0 + a) as isize - p.padding.0 as isize;
                            let ic = (c * p.stride.1 + bb) as isize - p.padding.1 as isize;
                            if ir >= 0 && (ir as usize) < h && ic >= 0 && (ic as usize) < wd {
                                acc += x.data()[((g * cpg + cl) * h + ir as usize) * wd + ic as usize] as f64
                                    * w.data()[((co * cpg + cl) * kh + a) * kw + bb] as f64;
                            }
                        }
                    }
                }
                out[(co * oh + r) * ow + c] = acc;
            }
        }
    }
    out
}

fn assert_close(got: &Tensor, want: &[f64], ctx: &str) {
    assert_eq!(got.len(), want.len(), "{ctx}");
    for (i, (g, w)) in got.data().iter().zip(want).enumerate() {
        assert!((*g as f64 - w).abs() < TOL * w.abs().max(1.0), "{ctx} at {i}: {g} vs {w}");
    }
}

#[test]
fn conv1d_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..100 {
        let groups = [1, 2, 3][rng.random_range(0..3)];
        let cin = groups * rng.random_range(1..=3);
        let cout = groups * rng.random_range(1..=3);
        let k = rng.random_range(1..=7);
        let p = Conv1dParams {
            stride: rng.random_range(1..=4),
            dilation: rng.random_range(1..=3),
            groups,
            padding: rng.random_range(0..=4),
        };
        let span = p.dilation * (k - 1) + 1;
        let len = rng.random_range(span.saturating_sub(2 * p.padding).max(1)..=span + 20);
        let x = random_tensor(&mut rng, vec![cin, len]);
        let w = random_tensor(&mut rng, vec![cout, cin / groups, k]);
        let b: Vec<f32> = (0..cout).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = conv1d(&x, &w, Some(&b), p).unwrap();
        assert_close(&got, &naive_conv1d(&x, &w, &b, p), &format!("case {case} {p:?} k={k} len={len}"));
    }
}

#[test]
fn conv_transpose1d_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..100 {
        let cin = rng.random_range(1..=4);
        let cout = rng.random_range(1..=4);
        let stride = rng.random_range(1..=8);
        let k = rng.random_range(1..=2 * stride + 2);
        let len = rng.random_range(1..=20);
        let full = (len - 1) * stride + k;
        let padding = rng.random_range(0..=(full - 1) / 2);
        let x = random_tensor(&mut rng, vec![cin, len]);
        let w = random_tensor(&mut rng, vec![cin, cout, k]);
        let b: Vec<f32> = (0..cout).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = conv_transpose1d(&x, &w, Some(&b), stride, padding).unwrap();
        assert_close(
            &got,
            &naive_conv_transpose1d(&x, &w, &b, stride, padding),
            &format!("case {case} s={stride} k={k} p={padding} len={len}"),
        );
    }
}

#[test]
fn conv_transpose_is_adjoint_of_strided_conv() {
    // <conv(x), y> == <x, conv_transpose(y)> for the same weights.
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let (cin, cout, stride) = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=4));
        let k = rng.random_range(stride..=stride + 4);
        let padding = rng.random_range(0..k / 2 + 1);
        // Lengths whose transposed output exactly restores `len`.
        let len = (rng.random_range(4..=12) - 1) * stride + k - 2 * padding;
        let p = Conv1dParams { stride, padding, ..Default::default() };
        let w = random_tensor(&mut rng, vec![cout, cin, k]);
        let x = random_tensor(&mut rng, vec![cin, len]);
        let fwd = conv1d(&x, &w, None, p).unwrap();
        let y = random_tensor(&mut rng, fwd.shape().to_vec());
        // [cout, cin, k] is exactly the transposed layout [in=cout, out=cin, k].
        let back = conv_transpose1d(&y, &w, None, stride, padding).unwrap();
        let lhs: f64 = fwd.data().iter().zip(y.data()).map(|(a, b)| *a as f64 * *b as f64).sum();
        assert_eq!(back.shape(), x.shape());
        let n = len;
        let rhs: f64 = (0..cin)
            .flat_map(|c| (0..n).map(move |t| (c, t)))
            .map(|(c, t)| x.data()[c * len + t] as f64 * back.data()[c * back.dim(1) + t] as f64)
            .sum();
        assert!((lhs - rhs).abs() < 1e-4, "{lhs} vs {rhs}");
    }
}

#[test]
fn conv2d_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for case in 0..100 {
        let groups = [1, 2][rng.random_range(0..2)];
        let cin = groups * rng.random_range(1..=2);
        let cout = groups * rng.random_range(1..=3);
        let (kh, kw) = (rng.random_range(1..=5), rng.random_range(1..=9));
        let p = Conv2dParams {
            stride: (rng.random_range(1..=3), rng.random_range(1..=3)),
            padding: (rng.random_range(0..=kh / 2), rng.random_range(0..=kw / 2)),
            groups,
        };
        let h = rng.random_range(kh..=kh + 8);
        let wd = rng.random_range(kw..=kw + 8);
        let x = random_tensor(&mut rng, vec![cin, h, wd]);
        let w = random_tensor(&mut rng, vec![cout, cin / groups, kh, kw]);
        let b: Vec<f32> = (0..cout).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = conv2d(&x, &w, Some(&b), p).unwrap();
        assert_close(&got, &naive_conv2d(&x, &w, &b, p), &format!("case {case} {p:?}"));
    }
}

#[test]
fn long_inputs_cross_chunk_boundaries() {
    // Enough output positions to force several im2col chunks.
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let x = random_tensor(&mut rng, vec![2, 40_000]);
    let w = random_tensor(&mut rng, vec![3, 2, 5]);
    let b = [0.1f32, -0.2, 0.3];
    let p = Conv1dParams { padding: 2, ..Default::default() };
    let got = conv1d(&x, &w, Some(&b), p).unwrap();
    assert_close(&got, &naive_conv1d(&x, &w, &b, p), "long");
}
