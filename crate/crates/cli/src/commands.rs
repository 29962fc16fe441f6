use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use fgseg::data::mask::{probabilities_from_gray16, write_mask, write_probability_map};
use fgseg::data::{
    crop_back, load_sequence, pad_to_multiple_of_4, synth_sequence, write_sequence, CodecRegistry, DecodedImage, LabelMask,
    SequenceHandle, SynthConfig,
};
use fgseg::metrics::{accumulate, aggregate, compute_metrics, threshold_grid, threshold_sweep, ConfusionCounts, VideoReport, METRIC_NAMES};
use fgseg::model::{build_model, Network, ModelParams};
use fgseg::training::{parse_manifest, select_frames, train_with_observer, TrainConfig, TrainingExample};
use fgseg::weights::{load_weights, read_container, save_weights};
use fgseg::{Scalar, Tensor};
use rayon::prelude::*;

use crate::{plugin, EvaluateArgs, InfoArgs, Precision, SegmentArgs, SweepArgs, SynthArgs, SynthFlags, TrainArgs};

fn synth_config(flags: &SynthFlags, seed: u64) -> SynthConfig {
    SynthConfig {
        width: flags.synth_width,
        height: flags.synth_height,
        n_frames: flags.synth_frames,
        objects: flags.synth_objects,
        speed: flags.synth_speed,
        min_size: flags.synth_min_size,
        max_size: flags.synth_max_size,
        disks: true,
        noise: flags.synth_noise,
        drift: flags.synth_drift,
        seed,
    }
}

fn check_threshold(t: f64) -> Result<()> {
    ensure!(t > 0.0 && t < 1.0, "threshold {t} must lie in (0, 1)");
    Ok(())
}

/// Where training frames come from.
enum Source {
    Sequence(SequenceHandle, CodecRegistry),
    Synthetic(Vec<(fgseg::data::RgbImage, LabelMask)>),
}

impl Source {
    fn len(&self) -> usize {
        match self {
            Source::Sequence(s, _) => s.len(),
            Source::Synthetic(f) => f.len(),
        }
    }

    fn frame_number(&self, i: usize) -> usize {
        match self {
            Source::Sequence(s, _) => s.frame_numbers[i],
            Source::Synthetic(_) => i + 1,
        }
    }

    fn index_of(&self, number: usize) -> Option<usize> {
        match self {
            Source::Sequence(s, _) => s.index_of(number),
            Source::Synthetic(f) => (1..=f.len()).contains(&number).then(|| number - 1),
        }
    }

    fn supervised(&self, i: usize) -> bool {
        match self {
            Source::Sequence(s, _) => s.in_temporal_roi(i),
            Source::Synthetic(_) => true,
        }
    }

    fn example<T: Scalar>(&self, i: usize) -> Result<TrainingExample<T>> {
        let (frame, labels) = match self {
            Source::Sequence(s, codecs) => (s.read_frame(i, codecs)?, s.read_labels(i, codecs)?),
            Source::Synthetic(f) => (f[i].0.to_tensor(), f[i].1.clone()),
        };
        Ok(TrainingExample { frame, labels, frame_index: self.frame_number(i) })
    }
}

pub fn train(a: &TrainArgs) -> Result<()> {
    match a.precision {
        Precision::F32 => train_with::<f32>(a),
        Precision::F64 => train_with::<f64>(a),
    }
}

fn train_with<T: Scalar>(a: &TrainArgs) -> Result<()> {
    let source = match &a.data {
        Some(root) => {
            let codecs = plugin::codecs();
            Source::Sequence(load_sequence(root, &codecs)?, codecs)
        }
        None => Source::Synthetic(synth_sequence(&synth_config(&a.synth, a.seed))?),
    };
    let selected = match &a.manifest {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
            let indices = parse_manifest(&text)?
                .into_iter()
                .map(|n| source.index_of(n).with_context(|| format!("manifest frame {n} is not in the sequence")))
                .collect::<Result<Vec<_>>>()?;
            select_frames(source.len(), indices.len(), a.seed, Some(&indices))?
        }
        None => {
            let candidates: Vec<usize> = (0..source.len()).filter(|&i| source.supervised(i)).collect();
            ensure!(
                a.frames <= candidates.len(),
                "--frames {} exceeds the {} labeled frames available",
                a.frames,
                candidates.len()
            );
            select_frames(candidates.len(), a.frames, a.seed, None)?
                .into_iter()
                .map(|k| candidates[k])
                .collect()
        }
    };
    let n = selected.len();
    let config = TrainConfig {
        epochs: a.epochs.unwrap_or(TrainConfig::default_epochs(n)),
        lr: a.lr,
        rho: a.rho,
        epsilon: a.epsilon,
        val_split: a.val_split,
        plateau_patience: a.patience,
        l2: a.l2,
        threshold: a.threshold,
        seed: a.seed,
        class_weighting: a.weighting.clone(),
        ..TrainConfig::for_frames(n)
    };
    config.validate()?;
    ensure!(n >= 5, "training needs at least 5 frames, {n} selected");
    let encoder = a.weights_in.as_deref().map(read_container).transpose()?;
    let weights_out = a.weights_out.clone().unwrap_or_else(|| a.out.join("model.fgsn"));

    println!("fgseg train ({}): {}", T::NAME, config.banner());
    println!(
        "source: {}",
        a.data.as_ref().map_or("synthetic scene".to_string(), |p| p.display().to_string())
    );
    let examples = selected.iter().map(|&i| source.example::<T>(i)).collect::<Result<Vec<_>>>()?;
    let params: ModelParams<T> = match &encoder {
        Some(c) => build_model(Some(c), a.seed)?,
        None => build_model(None, a.seed)?,
    };

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let (best, history) = train_with_observer(&config, &examples, params, &mut |r| {
        println!(
            "epoch {:>3}  train {:.6}  val {:.6}  lr {:e}",
            r.epoch + 1,
            r.train_loss,
            r.val_loss,
            r.lr
        );
    })?;
    if let Some(dir) = weights_out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_weights(&best, &weights_out)?;
    let history_path = a.out.join("history.csv");
    fs::write(&history_path, history.to_csv())?;
    println!(
        "kept epoch {} (val loss {:.6}); weights {}, history {}",
        history.checkpoint_epoch + 1,
        history.epochs[history.checkpoint_epoch].val_loss,
        weights_out.display(),
        history_path.display()
    );
    Ok(())
}

pub fn segment(a: &SegmentArgs) -> Result<()> {
    check_threshold(a.threshold)?;
    match a.precision {
        Precision::F32 => segment_with::<f32>(a),
        Precision::F64 => segment_with::<f64>(a),
    }
}

fn segment_with<T: Scalar>(a: &SegmentArgs) -> Result<()> {
    let codecs = plugin::codecs();
    let seq = load_sequence(&a.data, &codecs)?;
    let net = Network::new(load_weights::<T>(&a.weights_in)?)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let failures: Vec<String> = (0..seq.len())
        .into_par_iter()
        .filter_map(|i| {
            let run = || -> fgseg::Result<()> {
                let frame: Tensor<T> = seq.read_frame(i, &codecs)?;
                let (padded, extents) = pad_to_multiple_of_4(&frame)?;
                let probs = crop_back(&net.predict(&padded)?, extents)?;
                write_mask(&probs, a.threshold, &a.out.join(seq.mask_name(i)))?;
                if a.probabilities {
                    write_probability_map(&probs, &a.out.join(prob_name(&seq, i)))?;
                }
                Ok(())
            };
            run().err().map(|e| format!("{} ({e})", seq.frames[i].display()))
        })
        .collect();
    if !failures.is_empty() {
        bail!("{} of {} frames failed: {}", failures.len(), seq.len(), failures.join("; "));
    }
    println!("wrote {} masks to {} (threshold {})", seq.len(), a.out.display(), a.threshold);
    Ok(())
}

fn prob_name(seq: &SequenceHandle, i: usize) -> String {
    format!("prob{:06}.pgm", seq.frame_numbers[i])
}

struct Video {
    category: String,
    name: String,
    rel: PathBuf,
}

fn is_sequence(p: &Path) -> bool {
    p.join("input").is_dir() && p.join("groundtruth").is_dir()
}

fn subdirs(p: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(p)
        .with_context(|| format!("reading {}", p.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| "all".to_string(), |n| n.to_string_lossy().into_owned())
}

/// Finds sequences at the root, one level down (one category) or two levels
/// down (categories of videos).
fn discover(root: &Path) -> Result<Vec<Video>> {
    if is_sequence(root) {
        let category = root.parent().map_or_else(|| "all".to_string(), file_name);
        return Ok(vec![Video { category, name: file_name(root), rel: PathBuf::new() }]);
    }
    let mut videos = Vec::new();
    for child in subdirs(root)? {
        if is_sequence(&child) {
            videos.push(Video { category: file_name(root), name: file_name(&child), rel: PathBuf::from(file_name(&child)) });
            continue;
        }
        for grand in subdirs(&child)? {
            if is_sequence(&grand) {
                videos.push(Video {
                    category: file_name(&child),
                    name: file_name(&grand),
                    rel: PathBuf::from(file_name(&child)).join(file_name(&grand)),
                });
            }
        }
    }
    ensure!(!videos.is_empty(), "no sequences (input/ + groundtruth/) under {}", root.display());
    Ok(videos)
}

fn count_prefixed(dir: &Path, prefix: &str) -> Result<usize> {
    Ok(fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with(prefix))
        .count())
}

fn video_counts(seq: &SequenceHandle, mask_dir: &Path, codecs: &CodecRegistry) -> Result<ConfusionCounts> {
    let masks = count_prefixed(mask_dir, "bin")?;
    ensure!(
        masks == seq.len(),
        "{} masks in {} for {} ground-truth frames",
        masks,
        mask_dir.display(),
        seq.len()
    );
    let per_frame: Vec<ConfusionCounts> = (0..seq.len())
        .into_par_iter()
        .map(|i| -> Result<ConfusionCounts> {
            let labels = seq.read_labels(i, codecs)?;
            let path = mask_dir.join(seq.mask_name(i));
            let mask = codecs
                .read(&path)?
                .into_gray()
                .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            ensure!(
                (mask.width, mask.height) == (labels.width, labels.height),
                "{} is {}x{} but its ground truth is {}x{}",
                path.display(),
                mask.width,
                mask.height,
                labels.width,
                labels.height
            );
            let pred: Vec<bool> = mask.data.iter().map(|&v| v > 127).collect();
            Ok(accumulate(&pred, &labels)?)
        })
        .collect::<Result<_>>()?;
    Ok(per_frame.into_iter().sum())
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let codecs = plugin::codecs();
    let mut by_category: BTreeMap<String, Vec<VideoReport>> = BTreeMap::new();
    for video in discover(&a.data)? {
        let seq = load_sequence(&a.data.join(&video.rel), &codecs)?;
        let counts = video_counts(&seq, &a.masks.join(&video.rel), &codecs)?;
        by_category
            .entry(video.category)
            .or_default()
            .push(VideoReport { name: video.name, report: compute_metrics(counts) });
    }
    let agg = aggregate(by_category)?;
    print!("{}", agg.to_table());
    if let Some(out) = &a.out {
        fs::write(out, agg.to_csv()).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    ensure!(a.step > 0.0 && a.step < 1.0, "--step must lie in (0, 1)");
    let codecs = plugin::codecs();
    let mut probs: Vec<Tensor<f32>> = Vec::new();
    let mut labels = Vec::new();
    for video in discover(&a.data)? {
        let seq = load_sequence(&a.data.join(&video.rel), &codecs)?;
        let dir = a.probs.join(&video.rel);
        let maps = count_prefixed(&dir, "prob")?;
        ensure!(maps == seq.len(), "{} probability maps in {} for {} frames", maps, dir.display(), seq.len());
        for i in (0..seq.len()).filter(|&i| seq.in_temporal_roi(i)) {
            let path = dir.join(prob_name(&seq, i));
            let DecodedImage::Gray16(img) = codecs.read(&path)? else {
                bail!("{} is not a 16-bit probability map", path.display());
            };
            probs.push(probabilities_from_gray16(&img).cast());
            labels.push(seq.read_labels(i, &codecs)?);
        }
    }
    let report = threshold_sweep(&probs, &labels, &threshold_grid(a.step))?;
    print!("{:>9}", "threshold");
    for n in METRIC_NAMES {
        print!(" {n:>11}");
    }
    println!();
    for row in &report.rows {
        print!("{:>9.3}", row.threshold);
        for v in row.report.values() {
            print!(" {v:>11.4}");
        }
        println!();
    }
    println!("best threshold {:.3} (F-Measure {:.4})", report.best_threshold, report.best_f);
    if let Some(out) = &a.out {
        fs::write(out, report.to_csv()).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let config = synth_config(&a.synth, a.seed);
    config.validate()?;
    let frames = synth_sequence(&config)?;
    write_sequence(&a.out, &frames, None)?;
    println!(
        "wrote {} synthetic {}x{} frames to {}",
        frames.len(),
        config.width,
        config.height,
        a.out.display()
    );
    Ok(())
}

fn grouped(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

pub fn info(a: &InfoArgs) -> Result<()> {
    match a.precision {
        Precision::F32 => info_with::<f32>(a),
        Precision::F64 => info_with::<f64>(a),
    }
}

fn info_with<T: Scalar>(a: &InfoArgs) -> Result<()> {
    let params: ModelParams<T> = match &a.weights_in {
        Some(p) => load_weights(p)?,
        None => build_model(None, a.seed)?,
    };
    let net = Network::new(params)?;
    let c = net.params().counts();
    println!("total parameters:     {:>11}", grouped(c.total));
    println!("trainable parameters: {:>11}", grouped(c.trainable));
    println!("frozen parameters:    {:>11}", grouped(c.frozen));
    println!();
    println!(
        "{:<14} {:<8} {:>6} {:>6} {:>6} {:>6} {:>10} {:>9} {:>8}",
        "layer", "kind", "kernel", "stride", "in", "out", "params", "trainable", "l2"
    );
    for r in net.layer_table() {
        println!(
            "{:<14} {:<8} {:>6} {:>6} {:>6} {:>6} {:>10} {:>9} {:>8}",
            r.name,
            r.kind,
            format!("{0}x{0}", r.kernel),
            r.stride,
            r.in_channels,
            r.out_channels,
            grouped(r.params),
            if r.trainable { "yes" } else { "no" },
            if r.l2 > 0.0 { format!("{:e}", r.l2) } else { "-".into() }
        );
    }
    Ok(())
}
