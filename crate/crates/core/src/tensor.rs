//! Dense channel-major tensors and the scalar types they hold.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

/// Floating point element type of a [`Tensor`].
///
/// Implemented for `f32` (the default) and `f64` (used for finite-difference
/// gradient checks). The trait also routes matrix products to the matching
/// single or double precision GEMM kernel.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Sum + Send + Sync + 'static
{
    const NAME: &'static str;

    /// `c = alpha * a * b + beta * c` for row/column strided operands.
    ///
    /// `a` is `m x k`, `b` is `k x n`, `c` is `m x n`; strides are given as
    /// `(row_stride, col_stride)` in elements.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (usize, usize),
        b: &[Self],
        b_strides: (usize, usize),
        beta: Self,
        c: &mut [Self],
        c_strides: (usize, usize),
    );

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite conversion")
    }
}

fn check_extent(len: usize, rows: usize, cols: usize, (rs, cs): (usize, usize)) {
    if rows > 0 && cols > 0 {
        let last = (rows - 1) * rs + (cols - 1) * cs;
        assert!(last < len, "gemm operand out of bounds ({last} >= {len})");
    }
}

macro_rules! impl_scalar {
    ($t:ty, $name:literal, $kernel:path) => {
        impl Scalar for $t {
            const NAME: &'static str = $name;

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                a_strides: (usize, usize),
                b: &[Self],
                b_strides: (usize, usize),
                beta: Self,
                c: &mut [Self],
                c_strides: (usize, usize),
            ) {
                check_extent(a.len(), m, k, a_strides);
                check_extent(b.len(), k, n, b_strides);
                check_extent(c.len(), m, n, c_strides);
                // SAFETY: every operand extent was bounds-checked above.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        a_strides.0 as isize,
                        a_strides.1 as isize,
                        b.as_ptr(),
                        b_strides.0 as isize,
                        b_strides.1 as isize,
                        beta,
                        c.as_mut_ptr(),
                        c_strides.0 as isize,
                        c_strides.1 as isize,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, "f32", matrixmultiply::sgemm);
impl_scalar!(f64, "f64", matrixmultiply::dgemm);

/// Dense n-dimensional array stored contiguously in row-major order.
///
/// Feature maps are `(channels, height, width)`; convolution kernels are
/// `(out, in, kh, kw)` and transposed-convolution kernels `(in, out, kh, kw)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::dim(
                "tensor",
                format!(
                    "shape {shape:?} holds {expected} elements but {} were given",
                    data.len()
                ),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: T) -> Self {
        let shape = shape.into();
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![value; n],
        }
    }

    pub fn from_fn(shape: impl Into<Vec<usize>>, mut f: impl FnMut(usize) -> T) -> Self {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        Self {
            shape,
            data: (0..n).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// `(channels, height, width)` of a rank-3 tensor.
    pub fn chw(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::dim(
                "tensor",
                format!("expected (C,H,W) tensor, got shape {:?}", self.shape),
            )),
        }
    }

    pub fn reshape(mut self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::dim(
                "reshape",
                format!("cannot view {:?} as {shape:?}", self.shape),
            ));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Channel `c` of a `(C,H,W)` tensor as a flat slice.
    pub fn channel(&self, c: usize) -> &[T] {
        let plane = self.shape[1..].iter().product::<usize>();
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|v| U::from_f64_lossy(v.to_f64().unwrap_or(f64::NAN)))
                .collect(),
        }
    }

    /// Elementwise `self += alpha * other`.
    pub fn axpy(&mut self, alpha: T, other: &Tensor<T>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::dim(
                "axpy",
                format!("{:?} vs {:?}", self.shape, other.shape),
            ));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + alpha * b;
        }
        Ok(())
    }

    pub fn dot(&self, other: &Tensor<T>) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        self.sum() / T::from_usize(self.data.len().max(1)).unwrap()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Fails with [`Error::NonFinite`] naming `op` if any element is NaN or infinite.
    pub fn ensure_finite(self, op: &'static str) -> Result<Self> {
        if self.all_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite { op })
        }
    }
}

/// Geometry of a (transposed) convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub pad_h: usize,
    pub pad_w: usize,
    /// Extra rows/columns appended to a transposed convolution's output.
    pub output_pad: usize,
}

impl ConvSpec {
    /// Square kernel, stride 1, zero padding that preserves spatial size.
    pub fn same(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_h: kernel,
            kernel_w: kernel,
            stride: 1,
            pad_h: (kernel - 1) / 2,
            pad_w: (kernel - 1) / 2,
            output_pad: 0,
        }
    }

    /// Transposed convolution that doubles spatial extents: `stride` 2,
    /// `pad = (kernel - 1) / 2`, `output_pad` 1.
    pub fn upscale2(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            stride: 2,
            output_pad: 1,
            ..Self::same(in_channels, out_channels, kernel)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride < 1 || self.kernel_h < 1 || self.kernel_w < 1 {
            return Err(Error::InvalidArgument(format!(
                "stride and kernel must be >= 1 ({self:?})"
            )));
        }
        if self.output_pad >= self.stride {
            return Err(Error::InvalidArgument(format!(
                "output_pad {} must be smaller than stride {}",
                self.output_pad, self.stride
            )));
        }
        Ok(())
    }

    pub fn conv_output(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let ph = h + 2 * self.pad_h;
        let pw = w + 2 * self.pad_w;
        if ph < self.kernel_h || pw < self.kernel_w {
            return Err(Error::dim(
                "conv2d",
                format!("padded input {ph}x{pw} smaller than kernel"),
            ));
        }
        Ok((
            (ph - self.kernel_h) / self.stride + 1,
            (pw - self.kernel_w) / self.stride + 1,
        ))
    }

    pub fn tconv_output(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let oh = ((h.max(1) - 1) * self.stride + self.kernel_h + self.output_pad)
            .checked_sub(2 * self.pad_h);
        let ow = ((w.max(1) - 1) * self.stride + self.kernel_w + self.output_pad)
            .checked_sub(2 * self.pad_w);
        match (oh, ow) {
            (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok((oh, ow)),
            _ => Err(Error::dim(
                "tconv2d",
                format!("padding exceeds output for input {h}x{w}"),
            )),
        }
    }

    /// Number of learnable values: `kh * kw * in * out + out`.
    pub fn param_count(&self) -> usize {
        self.kernel_h * self.kernel_w * self.in_channels * self.out_channels + self.out_channels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_data() {
        assert!(Tensor::<f32>::new(vec![2, 3], vec![0.0; 6]).is_ok());
        let err = Tensor::<f32>::new(vec![2, 3], vec![0.0; 5]).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn ensure_finite_rejects_nan() {
        let t = Tensor::<f32>::new(vec![2], vec![1.0, f32::NAN]).unwrap();
        assert!(matches!(
            t.ensure_finite("test"),
            Err(Error::NonFinite { op: "test" })
        ));
    }

    #[test]
    fn gemm_transposed_strides() {
        // a = [[1,2],[3,4]], b = a^T via strides
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let mut c = [0.0f64; 4];
        f64::gemm(2, 2, 2, 1.0, &a, (2, 1), &a, (1, 2), 0.0, &mut c, (2, 1));
        assert_eq!(c, [5.0, 11.0, 11.0, 25.0]);
    }

    #[test]
    fn conv_spec_geometry() {
        let s = ConvSpec::same(3, 8, 3);
        assert_eq!(s.conv_output(17, 9).unwrap(), (17, 9));
        let up = ConvSpec::upscale2(4, 4, 5);
        assert_eq!(up.tconv_output(7, 3).unwrap(), (14, 6));
        let bad = ConvSpec {
            output_pad: 2,
            ..up
        };
        assert!(bad.validate().is_err());
    }
}
