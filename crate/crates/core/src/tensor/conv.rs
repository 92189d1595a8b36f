//! Strided convolution and transposed convolution with hand-derived gradients.
//!
//! Convolutions use "same" zero padding: the output of a stride-`s` layer over an
//! `h x w` input is `ceil(h/s) x ceil(w/s)`, and the padding before the first row
//! is `floor(pad_total / 2)` with `pad_total = max((out - 1)·s + k - h, 0)`. For
//! the stride-2, `k = 3` layers on even grids this gives zero leading padding, so
//! output `(i, j)` reads input rows `2i..2i+3`.
//!
//! The transposed convolution reads input `(floor(i/s) + a - p, floor(j/s) + b - p)`
//! for output `(i, j)`, with `p = (k - 1) / 2`. Every output pixel in an `s x s`
//! block therefore shares its pre-activation, so the layer is evaluated as a
//! stride-1 convolution on the coarse grid followed by nearest-neighbour upsampling.

use serde::{Deserialize, Serialize};

use super::activation::ActivationKind;
use super::field::Field3;
use super::filter::FilterBank;
use super::gemm::{gemm, Op};
use crate::error::{config_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    Deconv,
}

/// Index bookkeeping for one "same"-padded convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

impl ConvGeometry {
    pub fn same(in_h: usize, in_w: usize, in_c: usize, kernel: usize, stride: usize) -> Self {
        let out_h = in_h.div_ceil(stride);
        let out_w = in_w.div_ceil(stride);
        let pad = |inp: usize, out: usize| ((out - 1) * stride + kernel).saturating_sub(inp) / 2;
        Self {
            in_h,
            in_w,
            in_c,
            out_h,
            out_w,
            kernel,
            stride,
            pad_top: pad(in_h, out_h),
            pad_left: pad(in_w, out_w),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.out_h * self.out_w
    }

    #[inline]
    pub fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.in_c
    }

    /// Input coordinate read by output index `o` at kernel offset `a`, if inside the grid.
    #[inline]
    fn source(&self, o: usize, a: usize, pad: usize, limit: usize) -> Option<usize> {
        let r = (o * self.stride + a) as isize - pad as isize;
        (r >= 0 && (r as usize) < limit).then_some(r as usize)
    }

    fn im2col(&self, input: &[f64], patches: &mut Vec<f64>) {
        let k = self.kernel;
        let c = self.in_c;
        patches.clear();
        patches.resize(self.rows() * self.patch_len(), 0.0);
        let mut row = 0;
        for i in 0..self.out_h {
            for j in 0..self.out_w {
                let base = row * self.patch_len();
                for a in 0..k {
                    let Some(r) = self.source(i, a, self.pad_top, self.in_h) else {
                        continue;
                    };
                    for b in 0..k {
                        let Some(s) = self.source(j, b, self.pad_left, self.in_w) else {
                            continue;
                        };
                        let src = (r * self.in_w + s) * c;
                        let dst = base + (a * k + b) * c;
                        patches[dst..dst + c].copy_from_slice(&input[src..src + c]);
                    }
                }
                row += 1;
            }
        }
    }

    fn col2im(&self, cols: &[f64], grad_input: &mut [f64]) {
        let k = self.kernel;
        let c = self.in_c;
        let mut row = 0;
        for i in 0..self.out_h {
            for j in 0..self.out_w {
                let base = row * self.patch_len();
                for a in 0..k {
                    let Some(r) = self.source(i, a, self.pad_top, self.in_h) else {
                        continue;
                    };
                    for b in 0..k {
                        let Some(s) = self.source(j, b, self.pad_left, self.in_w) else {
                            continue;
                        };
                        let dst = (r * self.in_w + s) * c;
                        let src = base + (a * k + b) * c;
                        for (g, v) in grad_input[dst..dst + c].iter_mut().zip(&cols[src..src + c]) {
                            *g += v;
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Intermediate values of one layer's forward pass, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct LayerTrace {
    pub kind: LayerKind,
    pub geometry: ConvGeometry,
    /// Nearest-neighbour upsampling factor applied after the convolution (1 for `Conv`).
    pub upsample: usize,
    /// im2col patch matrix; empty when the layer ran on the direct path.
    patches: Vec<f64>,
    /// Layer input, kept only by the direct path.
    input: Option<Field3>,
    pre: Vec<f64>,
    activated: Vec<f64>,
    pub output: Field3,
}

impl LayerTrace {
    /// Values before the activation, row-major over the pre-upsampling grid.
    pub fn pre_activations(&self) -> &[f64] {
        &self.pre
    }
}

/// Layers with at most this many output channels skip im2col: with so few columns the
/// GEMM packing step costs more than the arithmetic.
const DIRECT_MAX_OUT_CHANNELS: usize = 4;

/// Dot product with four independent accumulators (fixed summation order).
#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let xc = x.chunks_exact(4);
    let yc = y.chunks_exact(4);
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (a, b) in xc.zip(yc) {
        for l in 0..4 {
            acc[l] += a[l] * b[l];
        }
    }
    let mut tail = 0.0;
    for (a, b) in xr.iter().zip(yr) {
        tail += a * b;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Weights reordered to `[f_out][a][b][f_in]` so each filter tap is contiguous.
fn weights_out_major(filters: &FilterBank) -> Vec<f64> {
    let (k, ci, co) = (filters.kernel(), filters.in_channels(), filters.out_channels());
    let mut wt = vec![0.0; k * k * ci * co];
    for a in 0..k {
        for b in 0..k {
            for c in 0..ci {
                for f in 0..co {
                    wt[((f * k + a) * k + b) * ci + c] = filters.weight(a, b, c, f);
                }
            }
        }
    }
    wt
}

impl ConvGeometry {
    fn direct_forward(&self, input: &[f64], filters: &FilterBank, pre: &mut [f64]) {
        let (k, c, fo) = (self.kernel, self.in_c, filters.out_channels());
        let wt = weights_out_major(filters);
        for i in 0..self.out_h {
            for j in 0..self.out_w {
                let out = &mut pre[(i * self.out_w + j) * fo..][..fo];
                out.copy_from_slice(filters.biases());
                for a in 0..k {
                    let Some(r) = self.source(i, a, self.pad_top, self.in_h) else {
                        continue;
                    };
                    for b in 0..k {
                        let Some(s) = self.source(j, b, self.pad_left, self.in_w) else {
                            continue;
                        };
                        let x = &input[(r * self.in_w + s) * c..][..c];
                        for (f, o) in out.iter_mut().enumerate() {
                            *o += dot(x, &wt[((f * k + a) * k + b) * c..][..c]);
                        }
                    }
                }
            }
        }
    }

    /// Accumulates weight gradients (in `[a][b][f_in][f_out]` order) and, when
    /// requested, the input gradient.
    fn direct_backward(
        &self,
        input: &[f64],
        filters: &FilterBank,
        dpre: &[f64],
        dw: &mut [f64],
        mut grad_input: Option<&mut [f64]>,
    ) {
        let (k, c, fo) = (self.kernel, self.in_c, filters.out_channels());
        let wt = weights_out_major(filters);
        let mut dwt = vec![0.0; wt.len()];
        for i in 0..self.out_h {
            for j in 0..self.out_w {
                let g = &dpre[(i * self.out_w + j) * fo..][..fo];
                for a in 0..k {
                    let Some(r) = self.source(i, a, self.pad_top, self.in_h) else {
                        continue;
                    };
                    for b in 0..k {
                        let Some(s) = self.source(j, b, self.pad_left, self.in_w) else {
                            continue;
                        };
                        let at = (r * self.in_w + s) * c;
                        for (f, &gf) in g.iter().enumerate() {
                            let tap = ((f * k + a) * k + b) * c;
                            axpy(gf, &input[at..at + c], &mut dwt[tap..tap + c]);
                            if let Some(gi) = grad_input.as_deref_mut() {
                                axpy(gf, &wt[tap..tap + c], &mut gi[at..at + c]);
                            }
                        }
                    }
                }
            }
        }
        for a in 0..k {
            for b in 0..k {
                for cc in 0..c {
                    for f in 0..fo {
                        dw[((a * k + b) * c + cc) * fo + f] = dwt[((f * k + a) * k + b) * c + cc];
                    }
                }
            }
        }
    }
}

/// Gradients of a layer with respect to its input and filter bank.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGradients {
    pub input: Field3,
    /// Same shape as the layer's filters; biases hold the bias gradient.
    pub filters: FilterBank,
}

fn validate(kind: LayerKind, input: &Field3, filters: &FilterBank, stride: usize) -> Result<()> {
    if stride == 0 {
        return config_err("stride must be positive");
    }
    if input.channels() != filters.in_channels() {
        return config_err(format!(
            "input has {} channels but the filter bank expects {}",
            input.channels(),
            filters.in_channels()
        ));
    }
    if kind == LayerKind::Conv && (input.height() < filters.kernel() || input.width() < filters.kernel()) {
        return config_err(format!(
            "input {}x{} is smaller than the {}x{} kernel",
            input.height(),
            input.width(),
            filters.kernel(),
            filters.kernel()
        ));
    }
    input.ensure_finite("layer input")
}

fn upsample_nearest(coarse: &[f64], h: usize, w: usize, c: usize, factor: usize) -> Field3 {
    if factor == 1 {
        return Field3::from_vec(h, w, c, coarse.to_vec()).expect("consistent dims");
    }
    let (oh, ow) = (h * factor, w * factor);
    let mut out = vec![0.0; oh * ow * c];
    for i in 0..oh {
        for j in 0..ow {
            let src = ((i / factor) * w + j / factor) * c;
            let dst = (i * ow + j) * c;
            out[dst..dst + c].copy_from_slice(&coarse[src..src + c]);
        }
    }
    Field3::from_vec(oh, ow, c, out).expect("consistent dims")
}

/// Sums `factor x factor` blocks: the adjoint of nearest-neighbour upsampling.
fn sum_pool(fine: &Field3, factor: usize) -> Vec<f64> {
    let (fh, fw, c) = fine.shape();
    let (h, w) = (fh / factor, fw / factor);
    let mut out = vec![0.0; h * w * c];
    let src = fine.as_slice();
    for i in 0..fh {
        for j in 0..fw {
            let s = (i * fw + j) * c;
            let d = ((i / factor) * w + j / factor) * c;
            for (o, v) in out[d..d + c].iter_mut().zip(&src[s..s + c]) {
                *o += v;
            }
        }
    }
    out
}

/// Runs one layer forward, keeping what the backward pass needs.
pub fn forward_traced(
    kind: LayerKind,
    input: &Field3,
    filters: &FilterBank,
    stride: usize,
    activation: ActivationKind,
) -> Result<LayerTrace> {
    validate(kind, input, filters, stride)?;
    let (conv_stride, upsample) = match kind {
        LayerKind::Conv => (stride, 1),
        LayerKind::Deconv => (1, stride),
    };
    let geometry = ConvGeometry::same(
        input.height(),
        input.width(),
        input.channels(),
        filters.kernel(),
        conv_stride,
    );
    let f = filters.out_channels();
    let rows = geometry.rows();
    let mut patches = Vec::new();
    let mut kept_input = None;
    let mut pre;
    if f <= DIRECT_MAX_OUT_CHANNELS {
        pre = vec![0.0; rows * f];
        geometry.direct_forward(input.as_slice(), filters, &mut pre);
        kept_input = Some(input.clone());
    } else {
        geometry.im2col(input.as_slice(), &mut patches);
        pre = Vec::with_capacity(rows * f);
        for _ in 0..rows {
            pre.extend_from_slice(filters.biases());
        }
        gemm(rows, geometry.patch_len(), f, &patches, Op::N, filters.weights(), Op::N, 1.0, &mut pre);
    }

    let mut activated = vec![0.0; pre.len()];
    activation.forward(&pre, f, &mut activated);
    let output = upsample_nearest(&activated, geometry.out_h, geometry.out_w, f, upsample);
    Ok(LayerTrace {
        kind,
        geometry,
        upsample,
        patches,
        input: kept_input,
        pre,
        activated,
        output,
    })
}

/// Backward pass from a trace. `grad_input` is skipped (left zero-sized) when not needed.
pub fn backward_traced(
    trace: &LayerTrace,
    filters: &FilterBank,
    activation: ActivationKind,
    upstream: &Field3,
    need_input_grad: bool,
) -> Result<(Option<Field3>, FilterBank)> {
    if upstream.shape() != trace.output.shape() {
        return config_err(format!(
            "upstream gradient shape {:?} does not match layer output {:?}",
            upstream.shape(),
            trace.output.shape()
        ));
    }
    let g = &trace.geometry;
    let f = filters.out_channels();
    let pooled;
    let coarse_upstream: &[f64] = if trace.upsample == 1 {
        upstream.as_slice()
    } else {
        pooled = sum_pool(upstream, trace.upsample);
        &pooled
    };
    let dpre = activation.backward(&trace.pre, &trace.activated, coarse_upstream, f);

    let rows = g.rows();
    let plen = g.patch_len();
    let mut grads = FilterBank::zeros(filters.kernel(), filters.in_channels(), f);
    {
        let (_, db) = grads.params_mut();
        for row in dpre.chunks_exact(f) {
            for (b, v) in db.iter_mut().zip(row) {
                *b += v;
            }
        }
    }

    if let Some(input) = &trace.input {
        let mut gi = need_input_grad.then(|| Field3::zeros(g.in_h, g.in_w, g.in_c));
        let (dw, _) = grads.params_mut();
        g.direct_backward(
            input.as_slice(),
            filters,
            &dpre,
            dw,
            gi.as_mut().map(|f| f.as_mut_slice()),
        );
        return Ok((gi, grads));
    }

    gemm(plen, rows, f, &trace.patches, Op::T, &dpre, Op::N, 0.0, grads.params_mut().0);
    let grad_input = if need_input_grad {
        let mut dcols = vec![0.0; rows * plen];
        gemm(rows, f, plen, &dpre, Op::N, filters.weights(), Op::T, 0.0, &mut dcols);
        let mut gi = Field3::zeros(g.in_h, g.in_w, g.in_c);
        g.col2im(&dcols, gi.as_mut_slice());
        Some(gi)
    } else {
        None
    };
    Ok((grad_input, grads))
}

/// Strided convolution followed by `activation`; output is `ceil(h/s) x ceil(w/s) x F`.
pub fn conv2d_forward(
    input: &Field3,
    filters: &FilterBank,
    stride: usize,
    activation: ActivationKind,
) -> Result<Field3> {
    Ok(forward_traced(LayerKind::Conv, input, filters, stride, activation)?.output)
}

pub fn conv2d_backward(
    input: &Field3,
    filters: &FilterBank,
    stride: usize,
    activation: ActivationKind,
    upstream: &Field3,
) -> Result<ConvGradients> {
    let trace = forward_traced(LayerKind::Conv, input, filters, stride, activation)?;
    let (gi, gf) = backward_traced(&trace, filters, activation, upstream, true)?;
    Ok(ConvGradients {
        input: gi.expect("requested"),
        filters: gf,
    })
}

/// Transposed convolution; output is `s·h x s·w x F`.
pub fn deconv2d_forward(
    input: &Field3,
    filters: &FilterBank,
    stride: usize,
    activation: ActivationKind,
) -> Result<Field3> {
    Ok(forward_traced(LayerKind::Deconv, input, filters, stride, activation)?.output)
}

pub fn deconv2d_backward(
    input: &Field3,
    filters: &FilterBank,
    stride: usize,
    activation: ActivationKind,
    upstream: &Field3,
) -> Result<ConvGradients> {
    let trace = forward_traced(LayerKind::Deconv, input, filters, stride, activation)?;
    let (gi, gf) = backward_traced(&trace, filters, activation, upstream, true)?;
    Ok(ConvGradients {
        input: gi.expect("requested"),
        filters: gf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct loop over the strided-convolution formula, with padding derived
    /// independently from the "same" output size.
    fn conv_oracle(x: &Field3, w: &FilterBank, stride: usize, act: ActivationKind) -> Field3 {
        let (h, wd, _) = x.shape();
        let k = w.kernel();
        let oh = (h + stride - 1) / stride;
        let ow = (wd + stride - 1) / stride;
        let pt = (((oh - 1) * stride + k) as isize - h as isize).max(0) / 2;
        let pl = (((ow - 1) * stride + k) as isize - wd as isize).max(0) / 2;
        let mut out = Field3::zeros(oh, ow, w.out_channels());
        for i in 0..oh {
            for j in 0..ow {
                for f in 0..w.out_channels() {
                    let mut acc = w.biases()[f];
                    for fi in 0..w.in_channels() {
                        for a in 0..k {
                            for b in 0..k {
                                let r = (stride * i + a) as isize - pt;
                                let s = (stride * j + b) as isize - pl;
                                if r < 0 || s < 0 || r >= h as isize || s >= wd as isize {
                                    continue;
                                }
                                acc += x.get(r as usize, s as usize, fi) * w.weight(a, b, fi, f);
                            }
                        }
                    }
                    out.set(i, j, f, act.apply(acc));
                }
            }
        }
        out
    }

    /// Direct loop over the transposed-convolution index formula.
    fn deconv_oracle(x: &Field3, w: &FilterBank, stride: usize, act: ActivationKind) -> Field3 {
        let (h, wd, _) = x.shape();
        let k = w.kernel();
        let p = ((k - 1) / 2) as isize;
        let mut out = Field3::zeros(h * stride, wd * stride, w.out_channels());
        for i in 0..h * stride {
            for j in 0..wd * stride {
                for f in 0..w.out_channels() {
                    let mut acc = w.biases()[f];
                    for fi in 0..w.in_channels() {
                        for a in 0..k {
                            for b in 0..k {
                                let r = (i / stride + a) as isize - p;
                                let s = (j / stride + b) as isize - p;
                                if r < 0 || s < 0 || r >= h as isize || s >= wd as isize {
                                    continue;
                                }
                                acc += x.get(r as usize, s as usize, fi) * w.weight(a, b, fi, f);
                            }
                        }
                    }
                    out.set(i, j, f, act.apply(acc));
                }
            }
        }
        out
    }

    fn random_field(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Field3 {
        Field3::from_vec(h, w, c, (0..h * w * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_bank(rng: &mut ChaCha8Rng, k: usize, fi: usize, fo: usize) -> FilterBank {
        FilterBank::from_parts(
            k,
            fi,
            fo,
            (0..k * k * fi * fo).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..fo).map(|_| rng.random_range(-0.5..0.5)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn bias_only_passes_through_leaky_relu() {
        let x = Field3::zeros(6, 6, 2);
        let mut w = FilterBank::zeros(3, 2, 4);
        w.biases_mut().fill(0.5);
        let y = conv2d_forward(&x, &w, 2, ActivationKind::leaky_relu()).unwrap();
        assert_eq!(y.shape(), (3, 3, 4));
        assert!(y.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn ones_input_stride_two_matches_loop_oracle() {
        let x = Field3::filled(4, 4, 1, 1.0);
        let w = FilterBank::from_parts(3, 1, 1, vec![1.0; 9], vec![0.0]).unwrap();
        let y = conv2d_forward(&x, &w, 2, ActivationKind::Identity).unwrap();
        let expect = conv_oracle(&x, &w, 2, ActivationKind::Identity);
        assert_eq!(y, expect);
        // Padding falls after the last row/col: windows rows {0,1,2} and {2,3}.
        assert_eq!(y.as_slice(), &[9.0, 6.0, 6.0, 4.0]);
    }

    #[test]
    fn conv_matches_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(h, w, ci, co, k, s) in &[(5, 5, 1, 2, 3, 1), (6, 4, 2, 3, 3, 2), (7, 7, 3, 6, 3, 2), (6, 6, 2, 9, 5, 3)] {
            let x = random_field(&mut rng, h, w, ci);
            let bank = random_bank(&mut rng, k, ci, co);
            let act = ActivationKind::leaky_relu();
            let y = conv2d_forward(&x, &bank, s, act).unwrap();
            let o = conv_oracle(&x, &bank, s, act);
            assert_eq!(y.shape(), o.shape());
            for (a, b) in y.as_slice().iter().zip(o.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deconv_two_by_two_stride_two_matches_oracle() {
        let x = Field3::from_vec(2, 2, 1, vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let w = FilterBank::from_parts(3, 1, 1, (1..=9).map(|v| v as f64 / 10.0).collect(), vec![0.1]).unwrap();
        let y = deconv2d_forward(&x, &w, 2, ActivationKind::Identity).unwrap();
        assert_eq!(y.shape(), (4, 4, 1));
        let o = deconv_oracle(&x, &w, 2, ActivationKind::Identity);
        for (a, b) in y.as_slice().iter().zip(o.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn deconv_zero_input_is_constant_bias() {
        let x = Field3::zeros(3, 3, 2);
        let mut w = FilterBank::zeros(3, 2, 1);
        w.biases_mut()[0] = -0.7;
        let y = deconv2d_forward(&x, &w, 2, ActivationKind::Identity).unwrap();
        assert_eq!(y.shape(), (6, 6, 1));
        assert!(y.as_slice().iter().all(|&v| v == -0.7));
    }

    #[test]
    fn deconv_matches_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(h, w, ci, co, s) in &[(3, 3, 2, 3, 2), (4, 2, 1, 7, 3), (2, 5, 3, 1, 1)] {
            let x = random_field(&mut rng, h, w, ci);
            let bank = random_bank(&mut rng, 3, ci, co);
            let act = ActivationKind::Tanh;
            let y = deconv2d_forward(&x, &bank, s, act).unwrap();
            let o = deconv_oracle(&x, &bank, s, act);
            for (a, b) in y.as_slice().iter().zip(o.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn burgers_shapes() {
        let mut x = Field3::zeros(64, 64, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (c_in, c_out) in [(2, 16), (16, 32), (32, 64)] {
            let bank = FilterBank::glorot_uniform(3, c_in, c_out, &mut rng);
            x = conv2d_forward(&x, &bank, 2, ActivationKind::leaky_relu()).unwrap();
        }
        assert_eq!(x.shape(), (8, 8, 64));
        for (c_in, c_out) in [(64, 64), (64, 32), (32, 16)] {
            let bank = FilterBank::glorot_uniform(3, c_in, c_out, &mut rng);
            x = deconv2d_forward(&x, &bank, 2, ActivationKind::leaky_relu()).unwrap();
        }
        assert_eq!(x.shape(), (64, 64, 16));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_field(&mut rng, 5, 5, 2);
        let bank = random_bank(&mut rng, 3, 2, 3);
        let up = Field3::zeros(5, 5, 3);
        let g = conv2d_backward(&x, &bank, 1, ActivationKind::Sigmoid, &up).unwrap();
        assert!(g.input.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.filters.weights().iter().all(|&v| v == 0.0));
        assert!(g.filters.biases().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_filter_passes_gradient_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_field(&mut rng, 4, 4, 1);
        let w = FilterBank::from_parts(1, 1, 1, vec![1.0], vec![0.25]).unwrap();
        let up = random_field(&mut rng, 4, 4, 1);
        let g = conv2d_backward(&x, &w, 1, ActivationKind::Identity, &up).unwrap();
        assert_eq!(g.input, up);
    }

    #[test]
    fn shape_mismatch_is_config_error() {
        let x = Field3::zeros(4, 4, 2);
        let w = FilterBank::zeros(3, 3, 1);
        assert!(conv2d_forward(&x, &w, 1, ActivationKind::Identity).is_err());
        let w = FilterBank::zeros(3, 2, 1);
        let bad_up = Field3::zeros(3, 3, 1);
        assert!(conv2d_backward(&x, &w, 1, ActivationKind::Identity, &bad_up).is_err());
        let mut nan = Field3::zeros(4, 4, 2);
        nan.set(0, 0, 0, f64::INFINITY);
        assert!(conv2d_forward(&nan, &w, 1, ActivationKind::Identity).is_err());
    }

    #[test]
    fn conv_then_deconv_restores_divisible_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &(h, w, s) in &[(8, 6, 2), (9, 12, 3), (4, 4, 4)] {
            let x = random_field(&mut rng, h, w, 1);
            let down = random_bank(&mut rng, 3, 1, 2);
            let up = random_bank(&mut rng, 3, 2, 1);
            let y = conv2d_forward(&x, &down, s, ActivationKind::Identity).unwrap();
            let z = deconv2d_forward(&y, &up, s, ActivationKind::Identity).unwrap();
            assert_eq!(z.shape(), x.shape());
        }
    }
}
