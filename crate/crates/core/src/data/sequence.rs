//! CDnet-layout sequence directories.
//!
//! ```text
//! <seq>/input/in000001.<ext>
//! <seq>/groundtruth/gt000001.<ext>
//! <seq>/temporalROI.txt      optional, "first last" (1-based frame numbers)
//! <seq>/ROI.<ext>            optional, nonzero = inside the region of interest
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use super::codec::CodecRegistry;
use super::image::{GrayImage, RgbImage};
use super::labels::{decode_label, LabelMask};
use super::netpbm;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug)]
pub struct SequenceHandle {
    pub root: PathBuf,
    pub frames: Vec<PathBuf>,
    pub ground_truth: Vec<PathBuf>,
    /// Number embedded in each frame's file name.
    pub frame_numbers: Vec<usize>,
    pub roi: Option<GrayImage>,
    pub temporal_roi: Option<(usize, usize)>,
}

fn seq_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::Sequence {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

fn list_prefixed(dir: &Path, prefix: &str) -> Result<Vec<(PathBuf, usize)>> {
    if !dir.is_dir() {
        return Err(seq_err(dir, "directory not found"));
    }
    let mut entries = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let Some(digits) = stem.strip_prefix(prefix) else {
            continue;
        };
        if let Ok(n) = digits.parse::<usize>() {
            entries.push((path, n));
        }
    }
    entries.sort();
    Ok(entries)
}

/// Parses the two-integer temporal ROI file contents.
pub fn parse_temporal_roi(text: &str) -> Option<(usize, usize)> {
    let mut it = text.split_whitespace().map(str::parse::<usize>);
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) if a <= b => Some((a, b)),
        _ => None,
    }
}

/// Opens a sequence directory and aligns frames with ground truths.
pub fn load_sequence(root: &Path, codecs: &CodecRegistry) -> Result<SequenceHandle> {
    let inputs = list_prefixed(&root.join("input"), "in")?;
    let gts = list_prefixed(&root.join("groundtruth"), "gt")?;
    if inputs.is_empty() {
        return Err(seq_err(&root.join("input"), "no in<number> frames"));
    }
    if inputs.len() != gts.len() {
        return Err(seq_err(
            root,
            format!("{} input frames but {} ground-truth files", inputs.len(), gts.len()),
        ));
    }
    for ((fp, fnum), (gp, gnum)) in inputs.iter().zip(&gts) {
        if fnum != gnum {
            return Err(seq_err(
                root,
                format!("{} does not pair with {}", fp.display(), gp.display()),
            ));
        }
    }

    let roi_file = root.join("temporalROI.txt");
    let temporal_roi = if roi_file.exists() {
        let text = fs::read_to_string(&roi_file)?;
        let (first, last) =
            parse_temporal_roi(&text).ok_or_else(|| seq_err(&roi_file, format!("unparsable temporal ROI {text:?}")))?;
        let max = inputs.last().map(|e| e.1).unwrap_or(0);
        if first < 1 || last > max {
            return Err(seq_err(&roi_file, format!("range {first}..{last} outside frames 1..{max}")));
        }
        Some((first, last))
    } else {
        None
    };

    let mut roi = None;
    let mut candidates: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_stem().and_then(|s| s.to_str()) == Some("ROI"))
        .collect();
    candidates.sort();
    for path in candidates {
        if codecs.supports(&path) {
            let img = codecs
                .read(&path)?
                .into_gray()
                .map_err(|detail| seq_err(&path, detail))?;
            roi = Some(img);
            break;
        }
        log::warn!("skipping {}: no decoder for its format", path.display());
    }

    Ok(SequenceHandle {
        root: root.to_path_buf(),
        frame_numbers: inputs.iter().map(|e| e.1).collect(),
        frames: inputs.into_iter().map(|e| e.0).collect(),
        ground_truth: gts.into_iter().map(|e| e.0).collect(),
        roi,
        temporal_roi,
    })
}

impl SequenceHandle {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn in_temporal_roi(&self, index: usize) -> bool {
        match self.temporal_roi {
            Some((a, b)) => (a..=b).contains(&self.frame_numbers[index]),
            None => true,
        }
    }

    /// Position of a frame number in the sequence.
    pub fn index_of(&self, frame_number: usize) -> Option<usize> {
        self.frame_numbers.iter().position(|&n| n == frame_number)
    }

    pub fn read_frame<T: Scalar>(&self, index: usize, codecs: &CodecRegistry) -> Result<Tensor<T>> {
        Ok(codecs.read(&self.frames[index])?.into_rgb().to_tensor())
    }

    /// Ground truth with the spatial ROI applied; frames outside the
    /// temporal ROI are entirely void.
    pub fn read_labels(&self, index: usize, codecs: &CodecRegistry) -> Result<LabelMask> {
        let path = &self.ground_truth[index];
        let gray = codecs
            .read(path)?
            .into_gray()
            .map_err(|detail| seq_err(path, detail))?;
        if !self.in_temporal_roi(index) {
            return Ok(LabelMask::all_void(gray.width, gray.height));
        }
        let mut mask = decode_label(&gray).map_err(|e| seq_err(path, e.to_string()))?;
        if let Some(roi) = &self.roi {
            mask.apply_roi(roi)?;
        }
        Ok(mask)
    }

    /// Output mask file name mirroring the input numbering.
    pub fn mask_name(&self, index: usize) -> String {
        format!("bin{:06}.pgm", self.frame_numbers[index])
    }
}

/// Writes frames and labels as a CDnet-layout directory (PPM inputs, PGM
/// ground truths, numbered from 1).
pub fn write_sequence(
    root: &Path,
    frames: &[(RgbImage, LabelMask)],
    temporal_roi: Option<(usize, usize)>,
) -> Result<()> {
    fs::create_dir_all(root.join("input"))?;
    fs::create_dir_all(root.join("groundtruth"))?;
    for (i, (frame, labels)) in frames.iter().enumerate() {
        let n = i + 1;
        fs::write(root.join("input").join(format!("in{n:06}.ppm")), netpbm::encode_ppm(frame))?;
        fs::write(
            root.join("groundtruth").join(format!("gt{n:06}.pgm")),
            netpbm::encode_pgm(&labels.to_gray()),
        )?;
    }
    if let Some((a, b)) = temporal_roi {
        fs::write(root.join("temporalROI.txt"), format!("{a} {b}\n"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::labels::LabelClass;

    fn tiny_sequence(root: &Path, n: usize) {
        let frames: Vec<_> = (0..n)
            .map(|i| {
                let img = RgbImage::new(4, 4, vec![i as u8; 48]).unwrap();
                let labels = LabelMask::from_codes(4, 4, vec![if i % 2 == 0 { 0 } else { 255 }; 16]).unwrap();
                (img, labels)
            })
            .collect();
        write_sequence(root, &frames, None).unwrap();
    }

    #[test]
    fn ten_aligned_pairs() {
        let dir = tempfile::tempdir().unwrap();
        tiny_sequence(dir.path(), 10);
        let codecs = CodecRegistry::default();
        let seq = load_sequence(dir.path(), &codecs).unwrap();
        assert_eq!(seq.len(), 10);
        assert_eq!(seq.frame_numbers, (1..=10).collect::<Vec<_>>());
        let f: Tensor<f32> = seq.read_frame(3, &codecs).unwrap();
        assert_eq!(f.shape(), &[3, 4, 4]);
        assert!(f.data().iter().all(|&v| v == 3.0));
        assert_eq!(seq.read_labels(1, &codecs).unwrap().count(LabelClass::Foreground), 16);
        assert_eq!(seq.mask_name(0), "bin000001.pgm");
    }

    #[test]
    fn missing_groundtruth_named() {
        let dir = tempfile::tempdir().unwrap();
        tiny_sequence(dir.path(), 2);
        fs::remove_dir_all(dir.path().join("groundtruth")).unwrap();
        let err = load_sequence(dir.path(), &CodecRegistry::default()).unwrap_err();
        assert!(err.to_string().contains("groundtruth"), "{err}");
    }

    #[test]
    fn count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        tiny_sequence(dir.path(), 3);
        fs::remove_file(dir.path().join("groundtruth/gt000002.pgm")).unwrap();
        assert!(load_sequence(dir.path(), &CodecRegistry::default()).is_err());
    }

    #[test]
    fn temporal_roi_parsing() {
        assert_eq!(parse_temporal_roi("470 1700"), Some((470, 1700)));
        assert_eq!(parse_temporal_roi(" 1\t5\n"), Some((1, 5)));
        assert_eq!(parse_temporal_roi("470"), None);
        assert_eq!(parse_temporal_roi("a b"), None);
        assert_eq!(parse_temporal_roi("5 1"), None);

        let dir = tempfile::tempdir().unwrap();
        tiny_sequence(dir.path(), 6);
        fs::write(dir.path().join("temporalROI.txt"), "3 5").unwrap();
        let codecs = CodecRegistry::default();
        let seq = load_sequence(dir.path(), &codecs).unwrap();
        assert_eq!(seq.temporal_roi, Some((3, 5)));
        assert!(!seq.in_temporal_roi(1));
        assert_eq!(seq.read_labels(0, &codecs).unwrap().count(LabelClass::Void), 16);
        fs::write(dir.path().join("temporalROI.txt"), "garbage").unwrap();
        assert!(load_sequence(dir.path(), &codecs).is_err());
    }

    #[test]
    fn spatial_roi_applied() {
        let dir = tempfile::tempdir().unwrap();
        tiny_sequence(dir.path(), 2);
        let mut roi = vec![255u8; 16];
        roi[..4].fill(0);
        fs::write(dir.path().join("ROI.pgm"), netpbm::encode_pgm(&GrayImage::new(4, 4, roi).unwrap())).unwrap();
        let codecs = CodecRegistry::default();
        let seq = load_sequence(dir.path(), &codecs).unwrap();
        assert_eq!(seq.read_labels(1, &codecs).unwrap().count(LabelClass::Void), 4);
    }
}
