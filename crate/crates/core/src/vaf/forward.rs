//! CPU inference: im2col convolutions and fully connected layers on top of
//! `matrixmultiply::sgemm`.

use super::arch::{LayerKind, LayerSpec, CHANNELS};
use super::weights::{LayerParams, Network};
use crate::error::{Error, Result};

/// Row-major `c x h x w` activations.
struct Tensor {
    data: Vec<f32>,
    c: usize,
    h: usize,
    w: usize,
}

/// `out[m x n] = a[m x k] * b[k x n]`, all row-major and contiguous.
fn gemm(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], out: &mut [f32]) {
    assert!(a.len() >= m * k && b.len() >= k * n && out.len() >= m * n);
    // SAFETY: the asserts above bound every index sgemm touches for these
    // dimensions and strides; the slices do not alias.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn conv2d(x: &Tensor, spec: &LayerSpec, p: &LayerParams, relu: bool) -> Tensor {
    let LayerKind::Conv {
        in_channels,
        out_channels,
        kernel: [kh, kw],
        stride,
    } = spec.kind
    else {
        unreachable!("conv2d on a dense layer");
    };
    debug_assert_eq!(x.c, in_channels);
    let ho = (x.h - kh) / stride + 1;
    let wo = (x.w - kw) / stride + 1;
    let k = in_channels * kh * kw;
    let n = ho * wo;

    // Column matrix: one row per (channel, ky, kx), one column per output pixel.
    let mut cols = vec![0f32; k * n];
    for c in 0..in_channels {
        let plane = &x.data[c * x.h * x.w..(c + 1) * x.h * x.w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (c * kh + ky) * kw + kx;
                let dst = &mut cols[row * n..(row + 1) * n];
                for oy in 0..ho {
                    let src = &plane[(oy * stride + ky) * x.w..];
                    let d = &mut dst[oy * wo..(oy + 1) * wo];
                    for (ox, v) in d.iter_mut().enumerate() {
                        *v = src[ox * stride + kx];
                    }
                }
            }
        }
    }
    let mut out = vec![0f32; out_channels * n];
    gemm(out_channels, k, n, &p.weight, &cols, &mut out);
    for (o, chunk) in out.chunks_mut(n).enumerate() {
        let b = p.bias[o];
        for v in chunk {
            *v += b;
            if relu && *v < 0.0 {
                *v = 0.0;
            }
        }
    }
    Tensor {
        data: out,
        c: out_channels,
        h: ho,
        w: wo,
    }
}

fn dense(x: &[f32], spec: &LayerSpec, p: &LayerParams, relu: bool) -> Vec<f32> {
    let LayerKind::Fc {
        in_features,
        out_features,
    } = spec.kind
    else {
        unreachable!("dense on a conv layer");
    };
    debug_assert_eq!(x.len(), in_features);
    let mut out = vec![0f32; out_features];
    gemm(out_features, in_features, 1, &p.weight, x, &mut out);
    for (v, b) in out.iter_mut().zip(&p.bias) {
        *v += b;
        if relu && *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

impl Network {
    /// Scalar value estimate for one encoded input pair. Dropout is the
    /// identity at inference.
    pub fn forward(&self, full: &[f32], local: &[f32]) -> Result<f32> {
        let input = self.input();
        if full.len() != input.full_len() {
            return Err(Error::Shape {
                layer: "full_conv1".into(),
                expected: format!("{CHANNELS}x{}x{} input", input.rows, input.full_cols),
                actual: format!("{} values", full.len()),
            });
        }
        if local.len() != input.local_len() {
            return Err(Error::Shape {
                layer: "local_conv1".into(),
                expected: format!("{CHANNELS}x{}x{} input", input.rows, input.local_cols),
                actual: format!("{} values", local.len()),
            });
        }
        let l = self.layers();
        let p = self.params();

        let x = Tensor {
            data: full.to_vec(),
            c: CHANNELS,
            h: input.rows,
            w: input.full_cols,
        };
        let x = conv2d(&x, &l[0], &p[0], true);
        let x = conv2d(&x, &l[1], &p[1], true);
        let x = dense(&x.data, &l[2], &p[2], true);
        let full_branch = dense(&x, &l[3], &p[3], false);

        let y = Tensor {
            data: local.to_vec(),
            c: CHANNELS,
            h: input.rows,
            w: input.local_cols,
        };
        let y = conv2d(&y, &l[4], &p[4], true);
        let y = conv2d(&y, &l[5], &p[5], true);
        let local_branch = dense(&y.data, &l[6], &p[6], false);

        let joined: Vec<f32> = full_branch
            .iter()
            .chain(&local_branch)
            .map(|v| v.max(0.0))
            .collect();
        let h = dense(&joined, &l[7], &p[7], true);
        let out = dense(&h, &l[8], &p[8], false);
        Ok(out[0])
    }
}
