//! Neural layers over NHWC tensors: zero-SAME convolutions, transposed
//! convolutions, pixel shuffle, fixed bilinear/bicubic resamplers, poolings,
//! and center crop/pad. All layers record gradients on the [`Tape`].
//!
//! Convolutions accumulate in f64 and parallelize over output rows; every
//! element is computed independently, so results do not depend on the
//! number of worker threads.

use crate::error::{Error, Result};
use crate::tensor::{grad_slot, val, Node, Tape, TapeOp, Tensor, TensorId};
use rand::Rng;
use rayon::prelude::*;

/// Parameters of a 2-D convolution: kernel `[kh, kw, c_in, c_out]`, bias
/// `[c_out]`, stride, and zero-SAME padding.
#[derive(Debug, Clone)]
pub struct Conv2DParams {
    pub kernel: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub padding: PaddingMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaddingMode {
    ZeroSame,
}

impl Conv2DParams {
    pub fn validate(&self) -> Result<()> {
        let ks = self.kernel.shape();
        if ks.len() != 4 {
            return Err(Error::shape("conv2d", format!("kernel rank {}", ks.len())));
        }
        if ks[0] % 2 == 0 || ks[1] % 2 == 0 {
            return Err(Error::Config(format!(
                "kernel extents must be odd, got {}x{}",
                ks[0], ks[1]
            )));
        }
        if self.bias.shape() != [ks[3]] {
            return Err(Error::shape(
                "conv2d",
                format!("bias shape {:?} vs c_out {}", self.bias.shape(), ks[3]),
            ));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Fixed upscaling selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMethod {
    Bilinear,
    Bicubic,
    Deconv,
    PixelShuffle,
}

impl ResampleMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bilinear" => Ok(Self::Bilinear),
            "bicubic" => Ok(Self::Bicubic),
            "deconv" => Ok(Self::Deconv),
            "shuffle" | "pixel_shuffle" => Ok(Self::PixelShuffle),
            _ => Err(Error::Config(format!("unknown upscaling method '{s}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Bilinear => "bilinear",
            Self::Bicubic => "bicubic",
            Self::Deconv => "deconv",
            Self::PixelShuffle => "shuffle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResampleSpec {
    pub method: ResampleMethod,
    pub factor: usize,
}

impl ResampleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.factor == 0 {
            return Err(Error::Config("resample factor must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    GlobalMax,
    GlobalAvg,
    ChannelMax,
    ChannelAvg,
}

/// He-uniform initialization: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
pub fn he_uniform(rng: &mut impl Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let limit = (6.0 / fan_in as f64).sqrt() as f32;
    let numel = shape.iter().product();
    let data = (0..numel).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor::new(shape.to_vec(), data).expect("init values are finite")
}

/// SAME padding: output extent `ceil(n / stride)` and top/left pad.
fn same_pads(n: usize, k: usize, stride: usize) -> (usize, usize) {
    let out = n.div_ceil(stride);
    let total = ((out - 1) * stride + k).saturating_sub(n);
    (out, total / 2)
}

// ---- conv2d ---------------------------------------------------------------

/// 2-D convolution, NHWC, zero-SAME padding. Differentiable w.r.t. the
/// input, kernel, and bias.
pub fn conv2d(
    tape: &mut Tape,
    x: TensorId,
    kernel: TensorId,
    bias: TensorId,
    stride: usize,
) -> Result<TensorId> {
    let xv = tape.value(x);
    let kv = tape.value(kernel);
    let bv = tape.value(bias);
    let xs = xv.shape().to_vec();
    let ks = kv.shape().to_vec();
    if xs.len() != 4 || ks.len() != 4 {
        return Err(Error::shape(
            "conv2d",
            format!("expected NHWC input and rank-4 kernel, got {xs:?} / {ks:?}"),
        ));
    }
    let (n, h, w, ci) = (xs[0], xs[1], xs[2], xs[3]);
    let (kh, kw, kci, co) = (ks[0], ks[1], ks[2], ks[3]);
    if ci != kci {
        return Err(Error::shape(
            "conv2d",
            format!("input channels {ci} vs kernel c_in {kci}"),
        ));
    }
    if bv.shape() != [co] {
        return Err(Error::shape("conv2d", format!("bias shape {:?}", bv.shape())));
    }
    if stride == 0 {
        return Err(Error::Config("stride must be >= 1".into()));
    }
    let (oh, pt) = same_pads(h, kh, stride);
    let (ow, pl) = same_pads(w, kw, stride);

    let xd = xv.data();
    let kd = kv.data();
    let bd = bv.data();
    let mut out = vec![0.0f32; n * oh * ow * co];
    out.par_chunks_mut(ow * co).enumerate().for_each(|(row, dst)| {
        let (ni, oi) = (row / oh, row % oh);
        let mut acc = vec![0.0f64; co];
        for oj in 0..ow {
            for (a, &b) in acc.iter_mut().zip(bd) {
                *a = f64::from(b);
            }
            for ki in 0..kh {
                let ii = (oi * stride + ki) as isize - pt as isize;
                if ii < 0 || ii >= h as isize {
                    continue;
                }
                for kj in 0..kw {
                    let jj = (oj * stride + kj) as isize - pl as isize;
                    if jj < 0 || jj >= w as isize {
                        continue;
                    }
                    let xoff = ((ni * h + ii as usize) * w + jj as usize) * ci;
                    let koff = (ki * kw + kj) * ci * co;
                    for c_in in 0..ci {
                        let xvv = f64::from(xd[xoff + c_in]);
                        let krow = &kd[koff + c_in * co..koff + (c_in + 1) * co];
                        for (a, &k) in acc.iter_mut().zip(krow) {
                            *a += xvv * f64::from(k);
                        }
                    }
                }
            }
            let dst = &mut dst[oj * co..(oj + 1) * co];
            for (d, &a) in dst.iter_mut().zip(&acc) {
                *d = a as f32;
            }
        }
    });

    let out = Tensor::new(vec![n, oh, ow, co], out)?;
    tape.push(
        "conv2d",
        out,
        Box::new(Conv2dOp {
            x,
            kernel,
            bias,
            stride,
            pads: (pt, pl),
        }),
    )
}

struct Conv2dOp {
    x: TensorId,
    kernel: TensorId,
    bias: TensorId,
    stride: usize,
    pads: (usize, usize),
}

impl TapeOp for Conv2dOp {
    fn backward(&self, _out: TensorId, g: &[f32], nodes: &[Node], grads: &mut [Option<Vec<f32>>]) {
        let xs = val(nodes, self.x).shape().to_vec();
        let ks = val(nodes, self.kernel).shape().to_vec();
        let (n, h, w, ci) = (xs[0], xs[1], xs[2], xs[3]);
        let (kh, kw, _, co) = (ks[0], ks[1], ks[2], ks[3]);
        let s = self.stride;
        let (pt, pl) = self.pads;
        let oh = h.div_ceil(s);
        let ow = w.div_ceil(s);
        let xd = val(nodes, self.x).data();
        let kd = val(nodes, self.kernel).data();

        // d/dx: gather over kernel taps that map back onto valid outputs
        let mut dx = vec![0.0f32; n * h * w * ci];
        dx.par_chunks_mut(w * ci).enumerate().for_each(|(row, dst)| {
            let (ni, ii) = (row / h, row % h);
            for jj in 0..w {
                for c_in in 0..ci {
                    let mut acc = 0.0f64;
                    for ki in 0..kh {
                        let oi_num = ii as isize + pt as isize - ki as isize;
                        if oi_num < 0 || oi_num % s as isize != 0 {
                            continue;
                        }
                        let oi = (oi_num / s as isize) as usize;
                        if oi >= oh {
                            continue;
                        }
                        for kj in 0..kw {
                            let oj_num = jj as isize + pl as isize - kj as isize;
                            if oj_num < 0 || oj_num % s as isize != 0 {
                                continue;
                            }
                            let oj = (oj_num / s as isize) as usize;
                            if oj >= ow {
                                continue;
                            }
                            let goff = ((ni * oh + oi) * ow + oj) * co;
                            let koff = ((ki * kw + kj) * ci + c_in) * co;
                            for c_out in 0..co {
                                acc += f64::from(g[goff + c_out]) * f64::from(kd[koff + c_out]);
                            }
                        }
                    }
                    dst[jj * ci + c_in] = acc as f32;
                }
            }
        });
        accumulate(grads, self.x, &dx);

        // d/dkernel: one (ki,kj) slab per task
        let mut dk = vec![0.0f32; kh * kw * ci * co];
        dk.par_chunks_mut(ci * co).enumerate().for_each(|(tap, dst)| {
            let (ki, kj) = (tap / kw, tap % kw);
            let mut acc = vec![0.0f64; ci * co];
            for ni in 0..n {
                for oi in 0..oh {
                    let ii = (oi * s + ki) as isize - pt as isize;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    for oj in 0..ow {
                        let jj = (oj * s + kj) as isize - pl as isize;
                        if jj < 0 || jj >= w as isize {
                            continue;
                        }
                        let xoff = ((ni * h + ii as usize) * w + jj as usize) * ci;
                        let goff = ((ni * oh + oi) * ow + oj) * co;
                        for c_in in 0..ci {
                            let xvv = f64::from(xd[xoff + c_in]);
                            let arow = &mut acc[c_in * co..(c_in + 1) * co];
                            for (a, gg) in arow.iter_mut().zip(&g[goff..goff + co]) {
                                *a += xvv * f64::from(*gg);
                            }
                        }
                    }
                }
            }
            for (d, &a) in dst.iter_mut().zip(&acc) {
                *d = a as f32;
            }
        });
        accumulate(grads, self.kernel, &dk);

        // d/dbias
        let mut db = vec![0.0f64; co];
        for chunk in g.chunks_exact(co) {
            for (d, &gg) in db.iter_mut().zip(chunk) {
                *d += f64::from(gg);
            }
        }
        let db: Vec<f32> = db.iter().map(|&v| v as f32).collect();
        accumulate(grads, self.bias, &db);
    }
}

// ---- transposed conv --------------------------------------------------------

/// Transposed convolution upscaling spatial extents by `factor`; the exact
/// adjoint of [`conv2d`] with the same kernel at stride `factor`.
pub fn transposed_conv2d(
    tape: &mut Tape,
    x: TensorId,
    kernel: TensorId,
    bias: TensorId,
    factor: usize,
) -> Result<TensorId> {
    if factor == 0 {
        return Err(Error::Config("transposed conv factor must be >= 1".into()));
    }
    let xv = tape.value(x);
    let kv = tape.value(kernel);
    let bv = tape.value(bias);
    let xs = xv.shape().to_vec();
    let ks = kv.shape().to_vec();
    if xs.len() != 4 || ks.len() != 4 {
        return Err(Error::shape("transposed_conv2d", format!("{xs:?} / {ks:?}")));
    }
    let (n, h, w, ci) = (xs[0], xs[1], xs[2], xs[3]);
    let (kh, kw, kci, co) = (ks[0], ks[1], ks[2], ks[3]);
    if ci != kci {
        return Err(Error::shape(
            "transposed_conv2d",
            format!("input channels {ci} vs kernel c_in {kci}"),
        ));
    }
    if bv.shape() != [co] {
        return Err(Error::shape(
            "transposed_conv2d",
            format!("bias shape {:?}", bv.shape()),
        ));
    }
    let (hh, ww) = (h * factor, w * factor);
    let pt = kh.saturating_sub(factor) / 2;
    let pl = kw.saturating_sub(factor) / 2;

    let xd = xv.data();
    let kd = kv.data();
    let bd = bv.data();
    let mut out = vec![0.0f32; n * hh * ww * co];
    out.par_chunks_mut(ww * co).enumerate().for_each(|(row, dst)| {
        let (ni, p) = (row / hh, row % hh);
        let s = factor as isize;
        for q in 0..ww {
            let mut acc: Vec<f64> = bd.iter().map(|&b| f64::from(b)).collect();
            for ki in 0..kh {
                let inum = p as isize + pt as isize - ki as isize;
                if inum < 0 || inum % s != 0 {
                    continue;
                }
                let i = (inum / s) as usize;
                if i >= h {
                    continue;
                }
                for kj in 0..kw {
                    let jnum = q as isize + pl as isize - kj as isize;
                    if jnum < 0 || jnum % s != 0 {
                        continue;
                    }
                    let j = (jnum / s) as usize;
                    if j >= w {
                        continue;
                    }
                    let xoff = ((ni * h + i) * w + j) * ci;
                    let koff = (ki * kw + kj) * ci * co;
                    for c_in in 0..ci {
                        let xvv = f64::from(xd[xoff + c_in]);
                        let krow = &kd[koff + c_in * co..koff + (c_in + 1) * co];
                        for (a, &k) in acc.iter_mut().zip(krow) {
                            *a += xvv * f64::from(k);
                        }
                    }
                }
            }
            let dst = &mut dst[q * co..(q + 1) * co];
            for (d, &a) in dst.iter_mut().zip(&acc) {
                *d = a as f32;
            }
        }
    });

    let out = Tensor::new(vec![n, hh, ww, co], out)?;
    tape.push(
        "transposed_conv2d",
        out,
        Box::new(TransposedConv2dOp {
            x,
            kernel,
            bias,
            factor,
            pads: (pt, pl),
        }),
    )
}

struct TransposedConv2dOp {
    x: TensorId,
    kernel: TensorId,
    bias: TensorId,
    factor: usize,
    pads: (usize, usize),
}

impl TapeOp for TransposedConv2dOp {
    fn backward(&self, _out: TensorId, g: &[f32], nodes: &[Node], grads: &mut [Option<Vec<f32>>]) {
        let xs = val(nodes, self.x).shape().to_vec();
        let ks = val(nodes, self.kernel).shape().to_vec();
        let (n, h, w, ci) = (xs[0], xs[1], xs[2], xs[3]);
        let (kh, kw, _, co) = (ks[0], ks[1], ks[2], ks[3]);
        let s = self.factor;
        let (pt, pl) = self.pads;
        let (hh, ww) = (h * s, w * s);
        let xd = val(nodes, self.x).data();
        let kd = val(nodes, self.kernel).data();

        // d/dx is a plain strided gather of g against the kernel
        let mut dx = vec![0.0f32; n * h * w * ci];
        dx.par_chunks_mut(w * ci).enumerate().for_each(|(row, dst)| {
            let (ni, i) = (row / h, row % h);
            for j in 0..w {
                for c_in in 0..ci {
                    let mut acc = 0.0f64;
                    for ki in 0..kh {
                        let p = (i * s + ki) as isize - pt as isize;
                        if p < 0 || p >= hh as isize {
                            continue;
                        }
                        for kj in 0..kw {
                            let q = (j * s + kj) as isize - pl as isize;
                            if q < 0 || q >= ww as isize {
                                continue;
                            }
                            let goff = ((ni * hh + p as usize) * ww + q as usize) * co;
                            let koff = ((ki * kw + kj) * ci + c_in) * co;
                            for c_out in 0..co {
                                acc += f64::from(g[goff + c_out]) * f64::from(kd[koff + c_out]);
                            }
                        }
                    }
                    dst[j * ci + c_in] = acc as f32;
                }
            }
        });
        accumulate(grads, self.x, &dx);

        let mut dk = vec![0.0f32; kh * kw * ci * co];
        dk.par_chunks_mut(ci * co).enumerate().for_each(|(tap, dst)| {
            let (ki, kj) = (tap / kw, tap % kw);
            let mut acc = vec![0.0f64; ci * co];
            for ni in 0..n {
                for i in 0..h {
                    let p = (i * s + ki) as isize - pt as isize;
                    if p < 0 || p >= hh as isize {
                        continue;
                    }
                    for j in 0..w {
                        let q = (j * s + kj) as isize - pl as isize;
                        if q < 0 || q >= ww as isize {
                            continue;
                        }
                        let xoff = ((ni * h + i) * w + j) * ci;
                        let goff = ((ni * hh + p as usize) * ww + q as usize) * co;
                        for c_in in 0..ci {
                            let xvv = f64::from(xd[xoff + c_in]);
                            let arow = &mut acc[c_in * co..(c_in + 1) * co];
                            for (a, gg) in arow.iter_mut().zip(&g[goff..goff + co]) {
                                *a += xvv * f64::from(*gg);
                            }
                        }
                    }
                }
            }
            for (d, &a) in dst.iter_mut().zip(&acc) {
                *d = a as f32;
            }
        });
        accumulate(grads, self.kernel, &dk);

        let mut db = vec![0.0f64; co];
        for chunk in g.chunks_exact(co) {
            for (d, &gg) in db.iter_mut().zip(chunk) {
                *d += f64::from(gg);
            }
        }
        let db: Vec<f32> = db.iter().map(|&v| v as f32).collect();
        accumulate(grads, self.bias, &db);
    }
}

// ---- pixel shuffle -----------------------------------------------------------

/// Rearrange `[n, h, w, r^2*c]` into `[n, r*h, r*w, c]`:
/// `out[n, r*i+di, r*j+dj, k] = x[n, i, j, (di*r+dj)*c + k]`.
pub fn pixel_shuffle(tape: &mut Tape, x: TensorId, r: usize) -> Result<TensorId> {
    let xv = tape.value(x);
    let xs = xv.shape().to_vec();
    if xs.len() != 4 {
        return Err(Error::shape("pixel_shuffle", format!("{xs:?}")));
    }
    let (n, h, w, cr) = (xs[0], xs[1], xs[2], xs[3]);
    if r == 0 || cr % (r * r) != 0 {
        return Err(Error::shape(
            "pixel_shuffle",
            format!("channel extent {cr} not divisible by {r}^2"),
        ));
    }
    let c = cr / (r * r);
    let xd = xv.data();
    let mut out = vec![0.0f32; xd.len()];
    let (hh, ww) = (r * h, r * w);
    for ni in 0..n {
        for i in 0..h {
            for j in 0..w {
                let src = ((ni * h + i) * w + j) * cr;
                for di in 0..r {
                    for dj in 0..r {
                        let dst = ((ni * hh + r * i + di) * ww + r * j + dj) * c;
                        let s = src + (di * r + dj) * c;
                        out[dst..dst + c].copy_from_slice(&xd[s..s + c]);
                    }
                }
            }
        }
    }
    let out = Tensor::new(vec![n, hh, ww, c], out)?;
    tape.push(
        "pixel_shuffle",
        out,
        Box::new(ShuffleOp {
            x,
            r,
            inverse: false,
        }),
    )
}

/// Exact inverse of [`pixel_shuffle`]: `[n, r*h, r*w, c]` back to
/// `[n, h, w, r^2*c]`.
pub fn pixel_unshuffle(tape: &mut Tape, x: TensorId, r: usize) -> Result<TensorId> {
    let xv = tape.value(x);
    let xs = xv.shape().to_vec();
    if xs.len() != 4 {
        return Err(Error::shape("pixel_unshuffle", format!("{xs:?}")));
    }
    let (n, hh, ww, c) = (xs[0], xs[1], xs[2], xs[3]);
    if r == 0 || hh % r != 0 || ww % r != 0 {
        return Err(Error::shape(
            "pixel_unshuffle",
            format!("spatial extents {hh}x{ww} not divisible by {r}"),
        ));
    }
    let (h, w) = (hh / r, ww / r);
    let cr = c * r * r;
    let xd = xv.data();
    let mut out = vec![0.0f32; xd.len()];
    for ni in 0..n {
        for i in 0..h {
            for j in 0..w {
                let dst = ((ni * h + i) * w + j) * cr;
                for di in 0..r {
                    for dj in 0..r {
                        let src = ((ni * hh + r * i + di) * ww + r * j + dj) * c;
                        let d = dst + (di * r + dj) * c;
                        out[d..d + c].copy_from_slice(&xd[src..src + c]);
                    }
                }
            }
        }
    }
    let out = Tensor::new(vec![n, h, w, cr], out)?;
    tape.push(
        "pixel_unshuffle",
        out,
        Box::new(ShuffleOp {
            x,
            r,
            inverse: true,
        }),
    )
}

struct ShuffleOp {
    x: TensorId,
    r: usize,
    inverse: bool,
}

impl TapeOp for ShuffleOp {
    fn backward(&self, out: TensorId, g: &[f32], nodes: &[Node], grads: &mut [Option<Vec<f32>>]) {
        // a permutation's adjoint is its inverse permutation
        let os = val(nodes, out).shape().to_vec();
        let r = self.r;
        let mut dx = vec![0.0f32; g.len()];
        if self.inverse {
            // out is [n,h,w,r^2*c]; scatter back to [n,rh,rw,c]
            let (n, h, w, cr) = (os[0], os[1], os[2], os[3]);
            let c = cr / (r * r);
            let (hh, ww) = (h * r, w * r);
            for ni in 0..n {
                for i in 0..h {
                    for j in 0..w {
                        let src = ((ni * h + i) * w + j) * cr;
                        for di in 0..r {
                            for dj in 0..r {
                                let dst = ((ni * hh + r * i + di) * ww + r * j + dj) * c;
                                let s = src + (di * r + dj) * c;
                                dx[dst..dst + c].copy_from_slice(&g[s..s + c]);
                            }
                        }
                    }
                }
            }
        } else {
            let (n, hh, ww, c) = (os[0], os[1], os[2], os[3]);
            let (h, w) = (hh / r, ww / r);
            let cr = c * r * r;
            for ni in 0..n {
                for i in 0..h {
                    for j in 0..w {
                        let dst = ((ni * h + i) * w + j) * cr;
                        for di in 0..r {
                            for dj in 0..r {
                                let src = ((ni * hh + r * i + di) * ww + r * j + dj) * c;
                                let d = dst + (di * r + dj) * c;
                                dx[d..d + c].copy_from_slice(&g[src..src + c]);
                            }
                        }
                    }
                }
            }
        }
        accumulate(grads, self.x, &dx);
    }
}

// ---- fixed resamplers ---------------------------------------------------------

/// Per-axis interpolation taps under the align-corners-false convention with
/// edge-clamped indices.
fn axis_taps(out_len: usize, in_len: usize, factor: usize, cubic: bool) -> Vec<Vec<(usize, f64)>> {
    (0..out_len)
        .map(|o| {
            let src = (o as f64 + 0.5) / factor as f64 - 0.5;
            let base = src.floor();
            let t = src - base;
            let base = base as isize;
            let clamp = |i: isize| i.clamp(0, in_len as isize - 1) as usize;
            if cubic {
                // Catmull-Rom (a = -0.5)
                let w0 = ((-0.5 * t + 1.0) * t - 0.5) * t;
                let w1 = (1.5 * t - 2.5) * t * t + 1.0;
                let w2 = ((-1.5 * t + 2.0) * t + 0.5) * t;
                let w3 = (0.5 * t - 0.5) * t * t;
                vec![
                    (clamp(base - 1), w0),
                    (clamp(base), w1),
                    (clamp(base + 1), w2),
                    (clamp(base + 2), w3),
                ]
            } else {
                vec![(clamp(base), 1.0 - t), (clamp(base + 1), t)]
            }
        })
        .collect()
}

/// Fixed bilinear/bicubic upscaling by an integer factor. No learned
/// parameters, but differentiable w.r.t. the input.
pub fn resample(tape: &mut Tape, x: TensorId, spec: &ResampleSpec) -> Result<TensorId> {
    spec.validate()?;
    let cubic = match spec.method {
        ResampleMethod::Bilinear => false,
        ResampleMethod::Bicubic => true,
        other => {
            return Err(Error::Config(format!(
                "resample supports bilinear/bicubic, got {}",
                other.name()
            )))
        }
    };
    let xv = tape.value(x);
    let xs = xv.shape().to_vec();
    if xs.len() != 4 {
        return Err(Error::shape("resample", format!("{xs:?}")));
    }
    let (n, h, w, c) = (xs[0], xs[1], xs[2], xs[3]);
    let (hh, ww) = (h * spec.factor, w * spec.factor);
    let rows = axis_taps(hh, h, spec.factor, cubic);
    let cols = axis_taps(ww, w, spec.factor, cubic);

    let xd = xv.data();
    // separable: interpolate rows into [n, hh, w, c], then columns
    let mut tmp = vec![0.0f64; n * hh * w * c];
    for ni in 0..n {
        for (oi, taps) in rows.iter().enumerate() {
            for j in 0..w {
                let dst = ((ni * hh + oi) * w + j) * c;
                for &(si, wt) in taps {
                    let src = ((ni * h + si) * w + j) * c;
                    for k in 0..c {
                        tmp[dst + k] += wt * f64::from(xd[src + k]);
                    }
                }
            }
        }
    }
    let mut out = vec![0.0f32; n * hh * ww * c];
    for ni in 0..n {
        for oi in 0..hh {
            for (oj, taps) in cols.iter().enumerate() {
                let dst = ((ni * hh + oi) * ww + oj) * c;
                for k in 0..c {
                    let mut acc = 0.0f64;
                    for &(sj, wt) in taps {
                        acc += wt * tmp[((ni * hh + oi) * w + sj) * c + k];
                    }
                    out[dst + k] = acc as f32;
                }
            }
        }
    }
    let out = Tensor::new(vec![n, hh, ww, c], out)?;
    tape.push("resample", out, Box::new(ResampleOp { x, rows, cols }))
}

struct ResampleOp {
    x: TensorId,
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
}

impl TapeOp for ResampleOp {
    fn backward(&self, out: TensorId, g: &[f32], nodes: &[Node], grads: &mut [Option<Vec<f32>>]) {
        let os = val(nodes, out).shape().to_vec();
        let xs = val(nodes, self.x).shape().to_vec();
        let (n, hh, ww, c) = (os[0], os[1], os[2], os[3]);
        let (h, w) = (xs[1], xs[2]);
        // adjoint of the separable interpolation, column pass first
        let mut dtmp = vec![0.0f64; n * hh * w * c];
        for ni in 0..n {
            for oi in 0..hh {
                for (oj, taps) in self.cols.iter().enumerate() {
                    let src = ((ni * hh + oi) * ww + oj) * c;
                    for &(sj, wt) in taps {
                        let dst = ((ni * hh + oi) * w + sj) * c;
                        for k in 0..c {
                            dtmp[dst + k] += wt * f64::from(g[src + k]);
                        }
                    }
                }
            }
        }
        let mut dx = vec![0.0f64; n * h * w * c];
        for ni in 0..n {
            for (oi, taps) in self.rows.iter().enumerate() {
                for j in 0..w {
                    let src = ((ni * hh + oi) * w + j) * c;
                    for &(si, wt) in taps {
                        let dst = ((ni * h + si) * w + j) * c;
                        for k in 0..c {
                            dx[dst + k] += wt * dtmp[src + k];
                        }
                    }
                }
            }
        }
        let dx: Vec<f32> = dx.iter().map(|&v| v as f32).collect();
        accumulate(grads, self.x, &dx);
    }
}

// ---- pooling -------------------------------------------------------------------

/// Global (over H,W) or channel-wise (over C) max/average pooling, built on
/// the tape reductions.
pub fn pool(tape: &mut Tape, kind: PoolKind, x: TensorId) -> Result<TensorId> {
    if tape.value(x).rank() != 4 {
        return Err(Error::shape(
            "pool",
            format!("expected NHWC input, got {:?}", tape.value(x).shape()),
        ));
    }
    match kind {
        PoolKind::GlobalMax => tape.max(x, &[1, 2]),
        PoolKind::GlobalAvg => tape.mean(x, &[1, 2]),
        PoolKind::ChannelMax => tape.max(x, &[3]),
        PoolKind::ChannelAvg => tape.mean(x, &[3]),
    }
}

// ---- center crop / pad -----------------------------------------------------------

/// Center-crop (or zero-pad, per axis) the spatial extents to `target`.
pub fn crop_or_pad(tape: &mut Tape, x: TensorId, target: (usize, usize)) -> Result<TensorId> {
    let xv = tape.value(x);
    let xs = xv.shape().to_vec();
    if xs.len() != 4 {
        return Err(Error::shape("crop_or_pad", format!("{xs:?}")));
    }
    let (n, h, w, c) = (xs[0], xs[1], xs[2], xs[3]);
    let (th, tw) = target;
    if th == 0 || tw == 0 {
        return Err(Error::Config("target extents must be positive".into()));
    }
    let off_i = (h as isize - th as isize) / 2;
    let off_j = (w as isize - tw as isize) / 2;
    let xd = xv.data();
    let mut out = vec![0.0f32; n * th * tw * c];
    for ni in 0..n {
        for ti in 0..th {
            let si = ti as isize + off_i;
            if si < 0 || si >= h as isize {
                continue;
            }
            for tj in 0..tw {
                let sj = tj as isize + off_j;
                if sj < 0 || sj >= w as isize {
                    continue;
                }
                let dst = ((ni * th + ti) * tw + tj) * c;
                let src = ((ni * h + si as usize) * w + sj as usize) * c;
                out[dst..dst + c].copy_from_slice(&xd[src..src + c]);
            }
        }
    }
    let out = Tensor::new(vec![n, th, tw, c], out)?;
    tape.push(
        "crop_or_pad",
        out,
        Box::new(CropOrPadOp {
            x,
            target,
            offsets: (off_i, off_j),
        }),
    )
}

struct CropOrPadOp {
    x: TensorId,
    target: (usize, usize),
    offsets: (isize, isize),
}

impl TapeOp for CropOrPadOp {
    fn backward(&self, _out: TensorId, g: &[f32], nodes: &[Node], grads: &mut [Option<Vec<f32>>]) {
        let xs = val(nodes, self.x).shape().to_vec();
        let (n, h, w, c) = (xs[0], xs[1], xs[2], xs[3]);
        let (th, tw) = self.target;
        let (off_i, off_j) = self.offsets;
        let mut dx = vec![0.0f32; n * h * w * c];
        for ni in 0..n {
            for ti in 0..th {
                let si = ti as isize + off_i;
                if si < 0 || si >= h as isize {
                    continue;
                }
                for tj in 0..tw {
                    let sj = tj as isize + off_j;
                    if sj < 0 || sj >= w as isize {
                        continue;
                    }
                    let src = ((ni * th + ti) * tw + tj) * c;
                    let dst = ((ni * h + si as usize) * w + sj as usize) * c;
                    dx[dst..dst + c].copy_from_slice(&g[src..src + c]);
                }
            }
        }
        accumulate(grads, self.x, &dx);
    }
}

// ---- helpers ----------------------------------------------------------------------

fn accumulate(grads: &mut [Option<Vec<f32>>], id: TensorId, contribution: &[f32]) {
    let slot = grad_slot(grads, id, contribution.len());
    for (d, &c) in slot.iter_mut().zip(contribution) {
        *d += c;
    }
}
