//! Three-scale Gaussian pyramid fed to the triplet encoder.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Blur and decimation settings. The blur sigma is `downscale / 3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PyramidConfig {
    pub downscale: usize,
    pub sigma: f64,
    /// Kernel half-width; the kernel has `2 * radius + 1` taps.
    pub radius: usize,
}

impl PyramidConfig {
    pub fn new(downscale: usize) -> Result<Self> {
        if downscale < 2 {
            return Err(Error::InvalidArgument(format!(
                "pyramid downscale must be >= 2, got {downscale}"
            )));
        }
        let sigma = downscale as f64 / 3.0;
        Ok(Self {
            downscale,
            sigma,
            radius: (4.0 * sigma).ceil() as usize,
        })
    }

    /// Normalized 1-D Gaussian taps, index `radius` is the centre.
    pub fn kernel(&self) -> Vec<f64> {
        let r = self.radius as isize;
        let two_var = 2.0 * self.sigma * self.sigma;
        let taps: Vec<f64> = (-r..=r).map(|k| (-((k * k) as f64) / two_var).exp()).collect();
        let sum: f64 = taps.iter().sum();
        taps.into_iter().map(|t| t / sum).collect()
    }
}

impl Default for PyramidConfig {
    fn default() -> Self {
        Self::new(2).expect("valid default")
    }
}

/// Half-sample symmetric reflection (`c b a | a b c | c b a`).
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Separable Gaussian blur applied to each channel independently.
///
/// Output values are confined to each channel's input range.
pub fn gaussian_blur<T: Scalar>(image: &Tensor<T>, config: &PyramidConfig) -> Result<Tensor<T>> {
    let (c, h, w) = image.chw()?;
    let taps: Vec<T> = config.kernel().into_iter().map(T::from_f64_lossy).collect();
    let r = config.radius as isize;
    let mut out = Vec::with_capacity(c * h * w);
    let mut tmp = vec![T::zero(); h * w];
    for ch in 0..c {
        let plane = image.channel(ch);
        let (lo, hi) = plane
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        for y in 0..h {
            let row = &plane[y * w..(y + 1) * w];
            for x in 0..w {
                let mut acc = T::zero();
                for (k, &t) in taps.iter().enumerate() {
                    acc = acc + t * row[reflect(x as isize + k as isize - r, w)];
                }
                tmp[y * w + x] = acc;
            }
        }
        for y in 0..h {
            for x in 0..w {
                let mut acc = T::zero();
                for (k, &t) in taps.iter().enumerate() {
                    acc = acc + t * tmp[reflect(y as isize + k as isize - r, h) * w + x];
                }
                out.push(acc.max(lo).min(hi));
            }
        }
    }
    Tensor::new(vec![c, h, w], out)?.ensure_finite("gaussian_blur")
}

/// Keeps every `factor`-th pixel starting at index 0 on both axes.
fn decimate<T: Scalar>(image: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    let (c, h, w) = image.chw()?;
    let (oh, ow) = (h.div_ceil(factor), w.div_ceil(factor));
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let plane = image.channel(ch);
        for y in (0..h).step_by(factor) {
            out.extend(plane[y * w..(y + 1) * w].iter().step_by(factor).copied());
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

/// Blur then decimate by `config.downscale`.
pub fn pyramid_reduce<T: Scalar>(image: &Tensor<T>, config: &PyramidConfig) -> Result<Tensor<T>> {
    decimate(&gaussian_blur(image, config)?, config.downscale)
}

/// The original image and its two successively reduced scales.
#[derive(Clone, Debug, PartialEq)]
pub struct PyramidTriple<T = f32> {
    pub scales: [Tensor<T>; 3],
}

impl<T: Scalar> PyramidTriple<T> {
    pub fn full(&self) -> &Tensor<T> {
        &self.scales[0]
    }

    pub fn half(&self) -> &Tensor<T> {
        &self.scales[1]
    }

    pub fn quarter(&self) -> &Tensor<T> {
        &self.scales[2]
    }
}

/// Builds the three-scale input with the default (downscale 2) settings.
/// Pixel values are passed through without any normalization.
pub fn build_pyramid<T: Scalar>(image: &Tensor<T>) -> Result<PyramidTriple<T>> {
    build_pyramid_with(image, &PyramidConfig::default())
}

pub fn build_pyramid_with<T: Scalar>(image: &Tensor<T>, config: &PyramidConfig) -> Result<PyramidTriple<T>> {
    let (_, h, w) = image.chw()?;
    let m = config.downscale * config.downscale;
    if h % m != 0 || w % m != 0 {
        return Err(Error::dim(
            "build_pyramid",
            format!("extent {h}x{w} is not a multiple of {m}"),
        ));
    }
    let half = pyramid_reduce(image, config)?;
    let quarter = pyramid_reduce(&half, config)?;
    Ok(PyramidTriple {
        scales: [image.clone(), half, quarter],
    })
}
