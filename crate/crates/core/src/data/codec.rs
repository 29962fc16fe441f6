//! Extension-keyed image decoders.
//!
//! The netpbm codecs are always present. Applications register decoders for
//! other formats (PNG, JPEG, BMP, ...) through [`ImageDecoder`].

use std::path::Path;
use std::sync::Arc;

use super::image::DecodedImage;
use super::netpbm;
use crate::error::{Error, Result};
use crate::registry::Registry;

pub trait ImageDecoder: Send + Sync {
    fn decode(&self, bytes: &[u8]) -> std::result::Result<DecodedImage, String>;
}

impl<F> ImageDecoder for F
where
    F: Fn(&[u8]) -> std::result::Result<DecodedImage, String> + Send + Sync,
{
    fn decode(&self, bytes: &[u8]) -> std::result::Result<DecodedImage, String> {
        self(bytes)
    }
}

#[derive(Clone)]
pub struct CodecRegistry {
    decoders: Registry<Arc<dyn ImageDecoder>>,
}

impl Default for CodecRegistry {
    fn default() -> Self {
        let mut decoders: Registry<Arc<dyn ImageDecoder>> = Registry::new("image format");
        let pnm: Arc<dyn ImageDecoder> = Arc::new(netpbm::decode);
        decoders
            .register("pgm", pnm.clone())
            .register("ppm", pnm.clone())
            .register("pnm", pnm);
        Self { decoders }
    }
}

impl CodecRegistry {
    /// Adds (or replaces) the decoder for a file extension.
    pub fn register(&mut self, extension: &str, decoder: Arc<dyn ImageDecoder>) -> &mut Self {
        self.decoders.register(extension, decoder);
        self
    }

    pub fn supports(&self, path: &Path) -> bool {
        extension(path).is_some_and(|e| self.decoders.contains(&e))
    }

    pub fn extensions(&self) -> Vec<String> {
        self.decoders.names().map(str::to_string).collect()
    }

    pub fn read(&self, path: &Path) -> Result<DecodedImage> {
        let ext = extension(path).ok_or_else(|| Error::Image {
            path: path.to_path_buf(),
            detail: "file has no extension".into(),
        })?;
        let decoder = self.decoders.get(&ext).map_err(|_| Error::Image {
            path: path.to_path_buf(),
            detail: format!("no decoder registered for .{ext}"),
        })?;
        let bytes = std::fs::read(path)?;
        decoder.decode(&bytes).map_err(|detail| Error::Image {
            path: path.to_path_buf(),
            detail,
        })
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}
