//! Convolution and transposed convolution via im2col + GEMM.

use crate::error::{Error, Result};
use crate::tensor::{ConvSpec, Scalar, Tensor};

/// Gradients of a parameterized layer. `input` is `None` when the caller did
/// not ask for it.
#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

fn is_pointwise(spec: &ConvSpec) -> bool {
    spec.kernel_h == 1
        && spec.kernel_w == 1
        && spec.stride == 1
        && spec.pad_h == 0
        && spec.pad_w == 0
}

/// Unfolds `(c, h, w)` into a `(c*kh*kw, oh*ow)` matrix of receptive fields.
fn im2col<T: Scalar>(
    src: &[T],
    (c, h, w): (usize, usize, usize),
    spec: &ConvSpec,
    (oh, ow): (usize, usize),
) -> Vec<T> {
    let (kh, kw, s) = (spec.kernel_h, spec.kernel_w, spec.stride);
    let n = oh * ow;
    let mut cols = vec![T::zero(); c * kh * kw * n];
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (ch * kh + ky) * kw + kx;
                let dst = &mut cols[row * n..(row + 1) * n];
                for oy in 0..oh {
                    let iy = (oy * s + ky) as isize - spec.pad_h as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src_row = &plane[iy as usize * w..(iy as usize + 1) * w];
                    let dst_row = &mut dst[oy * ow..(oy + 1) * ow];
                    for (ox, d) in dst_row.iter_mut().enumerate() {
                        let ix = (ox * s + kx) as isize - spec.pad_w as isize;
                        if ix >= 0 && (ix as usize) < w {
                            *d = src_row[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters-and-adds columns back into a `(c, h, w)` image.
fn col2im<T: Scalar>(
    cols: &[T],
    (c, h, w): (usize, usize, usize),
    spec: &ConvSpec,
    (oh, ow): (usize, usize),
) -> Vec<T> {
    let (kh, kw, s) = (spec.kernel_h, spec.kernel_w, spec.stride);
    let n = oh * ow;
    let mut img = vec![T::zero(); c * h * w];
    for ch in 0..c {
        let plane = &mut img[ch * h * w..(ch + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (ch * kh + ky) * kw + kx;
                let src = &cols[row * n..(row + 1) * n];
                for oy in 0..oh {
                    let iy = (oy * s + ky) as isize - spec.pad_h as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    let src_row = &src[oy * ow..(oy + 1) * ow];
                    for (ox, &v) in src_row.iter().enumerate() {
                        let ix = (ox * s + kx) as isize - spec.pad_w as isize;
                        if ix >= 0 && (ix as usize) < w {
                            dst_row[ix as usize] = dst_row[ix as usize] + v;
                        }
                    }
                }
            }
        }
    }
    img
}

fn check_params<T: Scalar>(
    op: &'static str,
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    spec: &ConvSpec,
    transposed: bool,
) -> Result<(usize, usize, usize)> {
    spec.validate()?;
    let (c, h, w) = input.chw()?;
    if c != spec.in_channels {
        return Err(Error::dim(
            op,
            format!(
                "input channel axis is {c}, layer expects {}",
                spec.in_channels
            ),
        ));
    }
    let expected = if transposed {
        [spec.in_channels, spec.out_channels, spec.kernel_h, spec.kernel_w]
    } else {
        [spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w]
    };
    if weights.shape() != expected {
        return Err(Error::dim(
            op,
            format!(
                "weight axes {:?} do not match expected {:?}",
                weights.shape(),
                expected
            ),
        ));
    }
    if bias.shape() != [spec.out_channels] {
        return Err(Error::dim(
            op,
            format!(
                "bias axis {:?} does not match out_channels {}",
                bias.shape(),
                spec.out_channels
            ),
        ));
    }
    Ok((c, h, w))
}

fn add_bias<T: Scalar>(out: &mut [T], bias: &[T], plane: usize) {
    for (chunk, &b) in out.chunks_mut(plane).zip(bias) {
        if b != T::zero() {
            chunk.iter_mut().for_each(|v| *v = *v + b);
        }
    }
}

fn bias_grad<T: Scalar>(grad_out: &Tensor<T>, channels: usize) -> Tensor<T> {
    let plane = grad_out.len() / channels.max(1);
    Tensor::from_fn(vec![channels], |c| {
        grad_out.data()[c * plane..(c + 1) * plane].iter().copied().sum()
    })
}

/// Zero-padded 2-D cross-correlation of a `(C,H,W)` tensor with
/// `(out, in, kh, kw)` weights.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    spec: &ConvSpec,
) -> Result<Tensor<T>> {
    let (c, h, w) = check_params("conv2d", input, weights, bias, spec, false)?;
    let (oh, ow) = spec.conv_output(h, w)?;
    let (m, k, n) = (spec.out_channels, c * spec.kernel_h * spec.kernel_w, oh * ow);
    let mut out = vec![T::zero(); m * n];
    if is_pointwise(spec) {
        T::gemm(m, k, n, T::one(), weights.data(), (k, 1), input.data(), (n, 1), T::zero(), &mut out, (n, 1));
    } else {
        let cols = im2col(input.data(), (c, h, w), spec, (oh, ow));
        T::gemm(m, k, n, T::one(), weights.data(), (k, 1), &cols, (n, 1), T::zero(), &mut out, (n, 1));
    }
    add_bias(&mut out, bias.data(), n);
    Tensor::new(vec![m, oh, ow], out)?.ensure_finite("conv2d")
}

/// Backward pass of [`conv2d_forward`] given the cached forward input.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
    spec: &ConvSpec,
    need_input: bool,
) -> Result<ConvGrads<T>> {
    let bias = Tensor::zeros(vec![spec.out_channels]);
    let (c, h, w) = check_params("conv2d_backward", input, weights, &bias, spec, false)?;
    let (oh, ow) = spec.conv_output(h, w)?;
    if grad_out.shape() != [spec.out_channels, oh, ow] {
        return Err(Error::dim(
            "conv2d_backward",
            format!(
                "grad_output axes {:?}, forward produced {:?}",
                grad_out.shape(),
                [spec.out_channels, oh, ow]
            ),
        ));
    }
    let (m, k, n) = (spec.out_channels, c * spec.kernel_h * spec.kernel_w, oh * ow);
    let pointwise = is_pointwise(spec);
    let owned_cols;
    let cols: &[T] = if pointwise {
        input.data()
    } else {
        owned_cols = im2col(input.data(), (c, h, w), spec, (oh, ow));
        &owned_cols
    };

    // dW (m x k) = dY (m x n) * cols^T
    let mut gw = vec![T::zero(); m * k];
    T::gemm(m, n, k, T::one(), grad_out.data(), (n, 1), cols, (1, n), T::zero(), &mut gw, (k, 1));

    let grad_input = if need_input {
        // dcols (k x n) = W^T * dY
        let mut gcols = vec![T::zero(); k * n];
        T::gemm(k, m, n, T::one(), weights.data(), (1, k), grad_out.data(), (n, 1), T::zero(), &mut gcols, (n, 1));
        let gx = if pointwise {
            gcols
        } else {
            col2im(&gcols, (c, h, w), spec, (oh, ow))
        };
        Some(Tensor::new(vec![c, h, w], gx)?.ensure_finite("conv2d_backward")?)
    } else {
        None
    };

    Ok(ConvGrads {
        input: grad_input,
        weights: Tensor::new(weights.shape().to_vec(), gw)?.ensure_finite("conv2d_backward")?,
        bias: bias_grad(grad_out, m),
    })
}

/// Transposed convolution (the input-gradient of [`conv2d_forward`]) with
/// `(in, out, kh, kw)` weights.
///
/// Output extent per axis is `(H - 1) * stride - 2 * pad + kernel + output_pad`.
pub fn tconv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    spec: &ConvSpec,
) -> Result<Tensor<T>> {
    let (c, h, w) = check_params("tconv2d", input, weights, bias, spec, true)?;
    let (oh, ow) = spec.tconv_output(h, w)?;
    let co = spec.out_channels;
    let rows = co * spec.kernel_h * spec.kernel_w;
    let n = h * w;
    let mut out = if is_pointwise(spec) {
        let mut out = vec![T::zero(); co * n];
        T::gemm(co, c, n, T::one(), weights.data(), (1, co), input.data(), (n, 1), T::zero(), &mut out, (n, 1));
        out
    } else {
        // cols (rows x n) = W^T (rows x c) * x (c x n)
        let mut cols = vec![T::zero(); rows * n];
        T::gemm(rows, c, n, T::one(), weights.data(), (1, rows), input.data(), (n, 1), T::zero(), &mut cols, (n, 1));
        col2im(&cols, (co, oh, ow), spec, (h, w))
    };
    add_bias(&mut out, bias.data(), oh * ow);
    Tensor::new(vec![co, oh, ow], out)?.ensure_finite("tconv2d")
}

/// Backward pass of [`tconv2d_forward`] given the cached forward input.
pub fn tconv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
    spec: &ConvSpec,
    need_input: bool,
) -> Result<ConvGrads<T>> {
    let bias = Tensor::zeros(vec![spec.out_channels]);
    let (c, h, w) = check_params("tconv2d_backward", input, weights, &bias, spec, true)?;
    let (oh, ow) = spec.tconv_output(h, w)?;
    let co = spec.out_channels;
    if grad_out.shape() != [co, oh, ow] {
        return Err(Error::dim(
            "tconv2d_backward",
            format!(
                "grad_output axes {:?}, forward produced {:?}",
                grad_out.shape(),
                [co, oh, ow]
            ),
        ));
    }
    let rows = co * spec.kernel_h * spec.kernel_w;
    let n = h * w;
    let owned;
    let gcols: &[T] = if is_pointwise(spec) {
        grad_out.data()
    } else {
        owned = im2col(grad_out.data(), (co, oh, ow), spec, (h, w));
        &owned
    };

    // dW (c x rows) = x (c x n) * gcols^T
    let mut gw = vec![T::zero(); c * rows];
    T::gemm(c, n, rows, T::one(), input.data(), (n, 1), gcols, (1, n), T::zero(), &mut gw, (rows, 1));

    let grad_input = if need_input {
        // dx (c x n) = W (c x rows) * gcols
        let mut gx = vec![T::zero(); c * n];
        T::gemm(c, rows, n, T::one(), weights.data(), (rows, 1), gcols, (n, 1), T::zero(), &mut gx, (n, 1));
        Some(Tensor::new(vec![c, h, w], gx)?.ensure_finite("tconv2d_backward")?)
    } else {
        None
    };

    Ok(ConvGrads {
        input: grad_input,
        weights: Tensor::new(weights.shape().to_vec(), gw)?.ensure_finite("tconv2d_backward")?,
        bias: bias_grad(grad_out, co),
    })
}
