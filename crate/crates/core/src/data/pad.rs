//! Padding to the multiple-of-4 extents the network requires.

use super::labels::{LabelMask, CODE_UNKNOWN};
use crate::error::{Error, Result};
use crate::pyramid::reflect;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Extents {
    pub height: usize,
    pub width: usize,
}

fn round_up(v: usize) -> usize {
    v.div_ceil(4).max(1) * 4
}

/// Reflect-pads the right and bottom edges of a `(C, H, W)` tensor up to the
/// next multiples of 4.
pub fn pad_to_multiple_of_4<T: Scalar>(image: &Tensor<T>) -> Result<(Tensor<T>, Extents)> {
    let (c, h, w) = image.chw()?;
    let extents = Extents { height: h, width: w };
    let (ph, pw) = (round_up(h), round_up(w));
    if (ph, pw) == (h, w) {
        return Ok((image.clone(), extents));
    }
    let mut out = Vec::with_capacity(c * ph * pw);
    for ch in 0..c {
        let plane = image.channel(ch);
        for y in 0..ph {
            let sy = reflect(y as isize, h);
            out.extend((0..pw).map(|x| plane[sy * w + reflect(x as isize, w)]));
        }
    }
    Ok((Tensor::new(vec![c, ph, pw], out)?, extents))
}

/// Pads a label mask to multiples of 4 with void pixels.
pub fn pad_labels(labels: &LabelMask) -> Result<LabelMask> {
    let (h, w) = (labels.height, labels.width);
    let (ph, pw) = (round_up(h), round_up(w));
    if (ph, pw) == (h, w) {
        return Ok(labels.clone());
    }
    let mut raw = vec![CODE_UNKNOWN; ph * pw];
    for y in 0..h {
        raw[y * pw..y * pw + w].copy_from_slice(&labels.raw()[y * w..(y + 1) * w]);
    }
    LabelMask::from_codes(pw, ph, raw)
}

/// Crops a `(C, H, W)` tensor back to its original extents (top-left anchored).
pub fn crop_back<T: Scalar>(image: &Tensor<T>, extents: Extents) -> Result<Tensor<T>> {
    let (c, h, w) = image.chw()?;
    if extents.height > h || extents.width > w {
        return Err(Error::dim(
            "crop_back",
            format!("cannot crop {h}x{w} to {}x{}", extents.height, extents.width),
        ));
    }
    if (extents.height, extents.width) == (h, w) {
        return Ok(image.clone());
    }
    let mut out = Vec::with_capacity(c * extents.height * extents.width);
    for ch in 0..c {
        let plane = image.channel(ch);
        for y in 0..extents.height {
            out.extend_from_slice(&plane[y * w..y * w + extents.width]);
        }
    }
    Tensor::new(vec![c, extents.height, extents.width], out)
}
