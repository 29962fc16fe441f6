//! In-memory 8/16-bit images and conversions to and from tensors.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gray16Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u16>,
}

/// Interleaved 8-bit RGB.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// Output of an image decoder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecodedImage {
    Gray(GrayImage),
    Gray16(Gray16Image),
    Rgb(RgbImage),
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "{width}x{height} gray image needs {} bytes, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(Error::InvalidArgument(format!(
                "{width}x{height} RGB image needs {} bytes, got {}",
                3 * width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Channel-major `(3, H, W)` tensor with raw 0-255 values.
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let plane = self.width * self.height;
        Tensor::from_fn(vec![3, self.height, self.width], |i| {
            let (c, p) = (i / plane, i % plane);
            T::from_u8(self.data[3 * p + c]).unwrap()
        })
    }

    /// Rounds and clamps a `(3, H, W)` tensor back into 8-bit RGB.
    pub fn from_tensor<T: Scalar>(t: &Tensor<T>) -> Result<Self> {
        let (c, h, w) = t.chw()?;
        if c != 3 {
            return Err(Error::dim("rgb", format!("expected 3 channels, got {c}")));
        }
        let plane = h * w;
        let mut data = vec![0u8; 3 * plane];
        for (i, &v) in t.data().iter().enumerate() {
            let (c, p) = (i / plane, i % plane);
            data[3 * p + c] = v.to_f64().unwrap().round().clamp(0.0, 255.0) as u8;
        }
        Ok(Self { width: w, height: h, data })
    }
}

impl DecodedImage {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            DecodedImage::Gray(g) => (g.width, g.height),
            DecodedImage::Gray16(g) => (g.width, g.height),
            DecodedImage::Rgb(c) => (c.width, c.height),
        }
    }

    /// Gray inputs are replicated into three channels.
    pub fn into_rgb(self) -> RgbImage {
        match self {
            DecodedImage::Rgb(c) => c,
            DecodedImage::Gray(g) => RgbImage {
                width: g.width,
                height: g.height,
                data: g.data.iter().flat_map(|&v| [v, v, v]).collect(),
            },
            DecodedImage::Gray16(g) => RgbImage {
                width: g.width,
                height: g.height,
                data: g.data.iter().flat_map(|&v| [(v >> 8) as u8; 3]).collect(),
            },
        }
    }

    /// Single-channel view. Color inputs must have equal channels (as
    /// ground-truth images saved in a color format do).
    pub fn into_gray(self) -> std::result::Result<GrayImage, String> {
        match self {
            DecodedImage::Gray(g) => Ok(g),
            DecodedImage::Gray16(g) => Ok(GrayImage {
                width: g.width,
                height: g.height,
                data: g.data.iter().map(|&v| (v >> 8) as u8).collect(),
            }),
            DecodedImage::Rgb(c) => {
                let mut data = Vec::with_capacity(c.width * c.height);
                for px in c.data.chunks_exact(3) {
                    if px[0] != px[1] || px[1] != px[2] {
                        return Err("color image where a grayscale one was expected".into());
                    }
                    data.push(px[0]);
                }
                Ok(GrayImage {
                    width: c.width,
                    height: c.height,
                    data,
                })
            }
        }
    }
}
