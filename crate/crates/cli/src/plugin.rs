//! Decoders for the compressed formats real datasets ship (PNG, JPEG, BMP,
//! TIFF), registered into the core codec registry.

use std::sync::Arc;

use fgseg::data::{CodecRegistry, DecodedImage, GrayImage, ImageDecoder, RgbImage};
use image::DynamicImage;

fn decode(bytes: &[u8]) -> Result<DecodedImage, String> {
    let img = image::load_from_memory(bytes).map_err(|e| e.to_string())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(match img {
        DynamicImage::ImageLuma8(g) => DecodedImage::Gray(GrayImage { width: w, height: h, data: g.into_raw() }),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => {
            DecodedImage::Gray(GrayImage { width: w, height: h, data: img.to_luma8().into_raw() })
        }
        other => DecodedImage::Rgb(RgbImage { width: w, height: h, data: other.to_rgb8().into_raw() }),
    })
}

pub fn codecs() -> CodecRegistry {
    let mut registry = CodecRegistry::default();
    let decoder: Arc<dyn ImageDecoder> = Arc::new(decode);
    for ext in ["png", "jpg", "jpeg", "bmp", "tif", "tiff"] {
        registry.register(ext, decoder.clone());
    }
    registry
}
