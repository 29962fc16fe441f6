//! Sequence ingestion, label decoding, padding, synthetic scenes and mask output.

pub mod codec;
pub mod image;
pub mod labels;
pub mod mask;
pub mod netpbm;
pub mod pad;
pub mod sequence;
pub mod synth;

pub use codec::{CodecRegistry, ImageDecoder};
pub use image::{DecodedImage, Gray16Image, GrayImage, RgbImage};
pub use labels::{decode_label, LabelClass, LabelMask};
pub use mask::{binarize, write_mask, write_probability_map};
pub use pad::{crop_back, pad_labels, pad_to_multiple_of_4, Extents};
pub use sequence::{load_sequence, write_sequence, SequenceHandle};
pub use synth::{synth_sequence, Shape, SynthConfig};
