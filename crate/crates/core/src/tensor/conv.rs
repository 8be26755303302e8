//! im2col-based 2-d convolution and its transpose.
//!
//! Kernels are stored `[out, in, kh, kw]` for `conv2d` and `[in, out, kh, kw]`
//! for the transposed convolution, so the same tensor used by a convolution
//! `C → K` drives the adjoint map `K → C`.

use super::linalg::{matmul_into, Mat};
use super::{Element, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    pub channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    fn col_rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    fn col_cols(&self) -> usize {
        self.out_h * self.out_w
    }
}

pub fn conv2d_output_size(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    if stride == 0 || kernel == 0 || kernel > padded {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

pub fn conv_transpose2d_output_size(
    input: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    output_pad: usize,
) -> Option<usize> {
    let full = (input.checked_sub(1)?) * stride + kernel + output_pad;
    full.checked_sub(2 * pad).filter(|&v| v > 0)
}

/// Unfolds the padded input into a `(C·kh·kw) × (out_h·out_w)` matrix.
fn im2col<E: Element>(src: &[E], g: &ConvGeometry, cols: &mut [E]) {
    let ocols = g.col_cols();
    for c in 0..g.channels {
        let plane = &src[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let dst = &mut cols[row * ocols..(row + 1) * ocols];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    let out_row = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.in_h as isize {
                        out_row.fill(E::zero());
                        continue;
                    }
                    let src_row = &plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    for (ox, slot) in out_row.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        *slot = if ix < 0 || ix >= g.in_w as isize {
                            E::zero()
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds columns back into the image.
fn col2im<E: Element>(cols: &[E], g: &ConvGeometry, dst: &mut [E]) {
    let ocols = g.col_cols();
    for c in 0..g.channels {
        let plane = &mut dst[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let src = &cols[row * ocols..(row + 1) * ocols];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    let base = iy as usize * g.in_w;
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        if ix >= 0 && (ix as usize) < g.in_w {
                            plane[base + ix as usize] =
                                plane[base + ix as usize] + src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

fn check_bias<E: Element>(bias: Option<&Tensor<E>>, channels: usize) -> Result<()> {
    if let Some(b) = bias {
        if b.shape() != [channels] {
            return Err(Error::shape(format!(
                "bias shape {:?} does not match {} output channels",
                b.shape(),
                channels
            )));
        }
    }
    Ok(())
}

/// Validated shapes of a forward convolution.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvPlan {
    pub batch: usize,
    pub out_channels: usize,
    pub geom: ConvGeometry,
}

pub(crate) fn plan_conv2d<E: Element>(
    input: &Tensor<E>,
    kernel: &Tensor<E>,
    bias: Option<&Tensor<E>>,
    stride: usize,
    pad: usize,
) -> Result<ConvPlan> {
    let [n, c, h, w] = input.dims4()?;
    let [k, kc, kh, kw] = kernel.dims4()?;
    if kc != c {
        return Err(Error::shape(format!(
            "conv2d: kernel expects {kc} input channels, input has {c}"
        )));
    }
    if stride == 0 {
        return Err(Error::invalid("conv2d: stride must be ≥ 1"));
    }
    check_bias(bias, k)?;
    let (out_h, out_w) = match (
        conv2d_output_size(h, kh, stride, pad),
        conv2d_output_size(w, kw, stride, pad),
    ) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::shape(format!(
                "conv2d: {kh}×{kw} kernel larger than padded {h}×{w} input (pad {pad})"
            )))
        }
    };
    Ok(ConvPlan {
        batch: n,
        out_channels: k,
        geom: ConvGeometry {
            channels: c,
            in_h: h,
            in_w: w,
            kh,
            kw,
            stride,
            pad,
            out_h,
            out_w,
        },
    })
}

pub(crate) fn conv2d_forward<E: Element>(
    input: &Tensor<E>,
    kernel: &Tensor<E>,
    bias: Option<&Tensor<E>>,
    plan: &ConvPlan,
) -> Tensor<E> {
    let g = &plan.geom;
    let k = plan.out_channels;
    let in_stride = g.channels * g.in_h * g.in_w;
    let out_plane = g.out_h * g.out_w;
    let mut out = vec![E::zero(); plan.batch * k * out_plane];
    let mut cols = vec![E::zero(); g.col_rows() * g.col_cols()];
    let wmat = Mat::new(kernel.data(), k, g.col_rows());
    for n in 0..plan.batch {
        im2col(&input.data()[n * in_stride..(n + 1) * in_stride], g, &mut cols);
        let dst = &mut out[n * k * out_plane..(n + 1) * k * out_plane];
        if let Some(b) = bias {
            for (ch, plane) in dst.chunks_mut(out_plane).enumerate() {
                plane.fill(b.data()[ch]);
            }
        }
        matmul_into(
            wmat,
            Mat::new(&cols, g.col_rows(), g.col_cols()),
            if bias.is_some() { E::one() } else { E::zero() },
            dst,
        );
    }
    Tensor::new(vec![plan.batch, k, g.out_h, g.out_w], out).expect("conv2d output shape")
}

/// Gradients of `conv2d` for input, kernel and bias (only those requested).
pub(crate) struct ConvGrads<E> {
    pub input: Option<Tensor<E>>,
    pub kernel: Option<Tensor<E>>,
    pub bias: Option<Tensor<E>>,
}

pub(crate) fn conv2d_backward<E: Element>(
    input: &Tensor<E>,
    kernel: &Tensor<E>,
    grad_out: &Tensor<E>,
    plan: &ConvPlan,
    need: [bool; 3],
) -> ConvGrads<E> {
    let g = &plan.geom;
    let k = plan.out_channels;
    let in_stride = g.channels * g.in_h * g.in_w;
    let out_plane = g.out_h * g.out_w;
    let mut d_input = need[0].then(|| vec![E::zero(); input.numel()]);
    let mut d_kernel = need[1].then(|| vec![E::zero(); kernel.numel()]);
    let mut d_bias = need[2].then(|| vec![E::zero(); k]);
    let mut cols = vec![E::zero(); g.col_rows() * g.col_cols()];
    let wmat = Mat::new(kernel.data(), k, g.col_rows());
    for n in 0..plan.batch {
        let dy = &grad_out.data()[n * k * out_plane..(n + 1) * k * out_plane];
        let dymat = Mat::new(dy, k, out_plane);
        if let Some(db) = d_bias.as_mut() {
            for (ch, plane) in dy.chunks(out_plane).enumerate() {
                db[ch] = db[ch] + plane.iter().copied().sum();
            }
        }
        if let Some(dk) = d_kernel.as_mut() {
            im2col(&input.data()[n * in_stride..(n + 1) * in_stride], g, &mut cols);
            matmul_into(
                dymat,
                Mat::new(&cols, g.col_rows(), g.col_cols()).t(),
                E::one(),
                dk,
            );
        }
        if let Some(dx) = d_input.as_mut() {
            matmul_into(wmat.t(), dymat, E::zero(), &mut cols);
            col2im(&cols, g, &mut dx[n * in_stride..(n + 1) * in_stride]);
        }
    }
    ConvGrads {
        input: d_input.map(|d| Tensor::new(input.shape().to_vec(), d).unwrap()),
        kernel: d_kernel.map(|d| Tensor::new(kernel.shape().to_vec(), d).unwrap()),
        bias: d_bias.map(|d| Tensor::new(vec![k], d).unwrap()),
    }
}

/// For the transposed convolution the geometry describes the *adjoint*
/// convolution: `in_*` is the transposed output, `out_*` its input.
pub(crate) fn plan_conv_transpose2d<E: Element>(
    input: &Tensor<E>,
    kernel: &Tensor<E>,
    bias: Option<&Tensor<E>>,
    stride: usize,
    pad: usize,
    output_pad: usize,
) -> Result<ConvPlan> {
    let [n, c_in, h, w] = input.dims4()?;
    let [kc_in, c_out, kh, kw] = kernel.dims4()?;
    if kc_in != c_in {
        return Err(Error::shape(format!(
            "transposed_conv2d: kernel expects {kc_in} input channels, input has {c_in}"
        )));
    }
    if stride == 0 {
        return Err(Error::invalid("transposed_conv2d: stride must be ≥ 1"));
    }
    if output_pad >= stride {
        return Err(Error::invalid(format!(
            "transposed_conv2d: output padding {output_pad} must be smaller than stride {stride}"
        )));
    }
    check_bias(bias, c_out)?;
    let (out_h, out_w) = match (
        conv_transpose2d_output_size(h, kh, stride, pad, output_pad),
        conv_transpose2d_output_size(w, kw, stride, pad, output_pad),
    ) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::shape(format!(
                "transposed_conv2d: padding {pad} leaves no output for {h}×{w} input"
            )))
        }
    };
    Ok(ConvPlan {
        batch: n,
        out_channels: c_in,
        geom: ConvGeometry {
            channels: c_out,
            in_h: out_h,
            in_w: out_w,
            kh,
            kw,
            stride,
            pad,
            out_h: h,
            out_w: w,
        },
    })
}

pub(crate) fn conv_transpose2d_forward<E: Element>(
    input: &Tensor<E>,
    kernel: &Tensor<E>,
    bias: Option<&Tensor<E>>,
    plan: &ConvPlan,
) -> Tensor<E> {
    let g = &plan.geom;
    let c_in = plan.out_channels;
    let in_plane = g.out_h * g.out_w;
    let out_stride = g.channels * g.in_h * g.in_w;
    let mut out = vec![E::zero(); plan.batch * out_stride];
    let mut cols = vec![E::zero(); g.col_rows() * g.col_cols()];
    let wmat = Mat::new(kernel.data(), c_in, g.col_rows());
    for n in 0..plan.batch {
        let x = &input.data()[n * c_in * in_plane..(n + 1) * c_in * in_plane];
        matmul_into(wmat.t(), Mat::new(x, c_in, in_plane), E::zero(), &mut cols);
        let dst = &mut out[n * out_stride..(n + 1) * out_stride];
        if let Some(b) = bias {
            for (ch, plane) in dst.chunks_mut(g.in_h * g.in_w).enumerate() {
                plane.fill(b.data()[ch]);
            }
        }
        col2im(&cols, g, dst);
    }
    Tensor::new(vec![plan.batch, g.channels, g.in_h, g.in_w], out)
        .expect("transposed conv output shape")
}

pub(crate) fn conv_transpose2d_backward<E: Element>(
    input: &Tensor<E>,
    kernel: &Tensor<E>,
    grad_out: &Tensor<E>,
    plan: &ConvPlan,
    need: [bool; 3],
) -> ConvGrads<E> {
    let g = &plan.geom;
    let c_in = plan.out_channels;
    let in_plane = g.out_h * g.out_w;
    let out_plane = g.in_h * g.in_w;
    let out_stride = g.channels * out_plane;
    let mut d_input = need[0].then(|| vec![E::zero(); input.numel()]);
    let mut d_kernel = need[1].then(|| vec![E::zero(); kernel.numel()]);
    let mut d_bias = need[2].then(|| vec![E::zero(); g.channels]);
    let mut cols = vec![E::zero(); g.col_rows() * g.col_cols()];
    let wmat = Mat::new(kernel.data(), c_in, g.col_rows());
    for n in 0..plan.batch {
        let dy = &grad_out.data()[n * out_stride..(n + 1) * out_stride];
        if let Some(db) = d_bias.as_mut() {
            for (ch, plane) in dy.chunks(out_plane).enumerate() {
                db[ch] = db[ch] + plane.iter().copied().sum();
            }
        }
        if d_input.is_none() && d_kernel.is_none() {
            continue;
        }
        im2col(dy, g, &mut cols);
        let colmat = Mat::new(&cols, g.col_rows(), g.col_cols());
        if let Some(dx) = d_input.as_mut() {
            let dst = &mut dx[n * c_in * in_plane..(n + 1) * c_in * in_plane];
            matmul_into(wmat, colmat, E::zero(), dst);
        }
        if let Some(dk) = d_kernel.as_mut() {
            let x = &input.data()[n * c_in * in_plane..(n + 1) * c_in * in_plane];
            matmul_into(Mat::new(x, c_in, in_plane), colmat.t(), E::one(), dk);
        }
    }
    ConvGrads {
        input: d_input.map(|d| Tensor::new(input.shape().to_vec(), d).unwrap()),
        kernel: d_kernel.map(|d| Tensor::new(kernel.shape().to_vec(), d).unwrap()),
        bias: d_bias.map(|d| Tensor::new(vec![g.channels], d).unwrap()),
    }
}
