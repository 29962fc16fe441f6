//! Ground-truth label semantics of CDnet-style gray-coded masks.

use super::image::GrayImage;
use crate::error::{Error, Result};

pub const CODE_STATIC: u8 = 0;
pub const CODE_SHADOW: u8 = 50;
pub const CODE_OUTSIDE_ROI: u8 = 85;
pub const CODE_UNKNOWN: u8 = 170;
pub const CODE_MOTION: u8 = 255;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LabelClass {
    Background,
    Foreground,
    /// Excluded from both loss and scoring.
    Void,
}

impl LabelClass {
    /// Shadow is scored as background; non-ROI and unknown (object
    /// boundary) pixels are void.
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            CODE_STATIC | CODE_SHADOW => Some(LabelClass::Background),
            CODE_OUTSIDE_ROI | CODE_UNKNOWN => Some(LabelClass::Void),
            CODE_MOTION => Some(LabelClass::Foreground),
            _ => None,
        }
    }
}

/// Per-pixel classes plus the raw codes they came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMask {
    pub width: usize,
    pub height: usize,
    classes: Vec<LabelClass>,
    raw: Vec<u8>,
}

impl LabelMask {
    pub fn from_codes(width: usize, height: usize, raw: Vec<u8>) -> Result<Self> {
        if raw.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "{width}x{height} label mask needs {} codes, got {}",
                width * height,
                raw.len()
            )));
        }
        let classes = raw
            .iter()
            .enumerate()
            .map(|(index, &code)| LabelClass::from_code(code).ok_or(Error::LabelCode { code, index }))
            .collect::<Result<_>>()?;
        Ok(Self {
            width,
            height,
            classes,
            raw,
        })
    }

    /// Builds a mask from classes, encoding void as the unknown code.
    pub fn from_classes(width: usize, height: usize, classes: Vec<LabelClass>) -> Result<Self> {
        let raw = classes
            .iter()
            .map(|c| match c {
                LabelClass::Background => CODE_STATIC,
                LabelClass::Foreground => CODE_MOTION,
                LabelClass::Void => CODE_UNKNOWN,
            })
            .collect();
        Self::from_codes(width, height, raw)
    }

    pub fn classes(&self) -> &[LabelClass] {
        &self.classes
    }

    pub fn raw(&self) -> &[u8] {
        &self.raw
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn count(&self, class: LabelClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }

    /// Marks pixels outside a spatial ROI (zero in `roi`) as void.
    pub fn apply_roi(&mut self, roi: &GrayImage) -> Result<()> {
        if (roi.width, roi.height) != (self.width, self.height) {
            return Err(Error::dim(
                "apply_roi",
                format!(
                    "ROI is {}x{}, mask is {}x{}",
                    roi.width, roi.height, self.width, self.height
                ),
            ));
        }
        for ((c, r), &inside) in self.classes.iter_mut().zip(&mut self.raw).zip(&roi.data) {
            if inside == 0 {
                *c = LabelClass::Void;
                *r = CODE_OUTSIDE_ROI;
            }
        }
        Ok(())
    }

    /// Every pixel void (used for frames outside the temporal ROI).
    pub fn all_void(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            classes: vec![LabelClass::Void; width * height],
            raw: vec![CODE_OUTSIDE_ROI; width * height],
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.raw.clone(),
        }
    }
}

/// Decodes an 8-bit ground-truth image; any code outside
/// {0, 50, 85, 170, 255} is rejected.
pub fn decode_label(gt: &GrayImage) -> Result<LabelMask> {
    LabelMask::from_codes(gt.width, gt.height, gt.data.clone())
}
