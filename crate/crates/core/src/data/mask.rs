//! Thresholded mask output.

use std::path::Path;

use super::image::{Gray16Image, GrayImage};
use super::netpbm;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

fn plane<T: Scalar>(probs: &Tensor<T>) -> Result<(usize, usize)> {
    match probs.chw()? {
        (1, h, w) => Ok((h, w)),
        (c, _, _) => Err(Error::dim("mask", format!("expected one channel, got {c}"))),
    }
}

/// 255 where `p > threshold`, else 0.
pub fn binarize<T: Scalar>(probs: &Tensor<T>, threshold: f64) -> Result<GrayImage> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside (0, 1)")));
    }
    let (h, w) = plane(probs)?;
    let t = T::from_f64_lossy(threshold);
    GrayImage::new(w, h, probs.data().iter().map(|&p| if p > t { 255 } else { 0 }).collect())
}

/// Writes the thresholded mask as a binary PGM; no post-processing.
pub fn write_mask<T: Scalar>(probs: &Tensor<T>, threshold: f64, path: &Path) -> Result<()> {
    let mask = binarize(probs, threshold)?;
    std::fs::write(path, netpbm::encode_pgm(&mask))?;
    Ok(())
}

/// Probabilities scaled to the full 16-bit range.
pub fn probability_image<T: Scalar>(probs: &Tensor<T>) -> Result<Gray16Image> {
    let (h, w) = plane(probs)?;
    Ok(Gray16Image {
        width: w,
        height: h,
        data: probs
            .data()
            .iter()
            .map(|p| (p.to_f64().unwrap().clamp(0.0, 1.0) * 65535.0).round() as u16)
            .collect(),
    })
}

pub fn write_probability_map<T: Scalar>(probs: &Tensor<T>, path: &Path) -> Result<()> {
    std::fs::write(path, netpbm::encode_pgm16(&probability_image(probs)?))?;
    Ok(())
}

/// Inverse of [`probability_image`].
pub fn probabilities_from_gray16(img: &Gray16Image) -> Tensor<f64> {
    Tensor::from_fn(vec![1, img.height, img.width], |i| img.data[i] as f64 / 65535.0)
}
