//! Class weights and the void-masked weighted binary cross-entropy.

use std::fmt::Debug;
use std::sync::Arc;

use crate::data::labels::{LabelClass, LabelMask};
use crate::error::{Error, Result};
use crate::registry::Registry;
use crate::tensor::{Scalar, Tensor};

/// Probabilities are clipped to `[CLIP, 1 - CLIP]` before taking logs.
pub const CLIP: f64 = 1e-7;

/// Per-frame `(w_fg, w_bg)` from the label distribution.
pub trait ClassWeighting: Send + Sync + Debug {
    fn weights(&self, labels: &LabelMask) -> (f64, f64);
}

/// `n / (2 n_c)` over valid pixels; `(1, 1)` when a class is absent.
#[derive(Clone, Copy, Debug, Default)]
pub struct Balanced;

#[derive(Clone, Copy, Debug, Default)]
pub struct Uniform;

impl ClassWeighting for Balanced {
    fn weights(&self, labels: &LabelMask) -> (f64, f64) {
        class_weights(labels)
    }
}

impl ClassWeighting for Uniform {
    fn weights(&self, _: &LabelMask) -> (f64, f64) {
        (1.0, 1.0)
    }
}

pub fn class_weighting_registry() -> Registry<Arc<dyn ClassWeighting>> {
    let mut r: Registry<Arc<dyn ClassWeighting>> = Registry::new("class weighting");
    r.register("balanced", Arc::new(Balanced)).register("uniform", Arc::new(Uniform));
    r
}

pub fn class_weights(labels: &LabelMask) -> (f64, f64) {
    weights_from_counts(labels.count(LabelClass::Foreground), labels.count(LabelClass::Background))
}

pub fn weights_from_counts(n_fg: usize, n_bg: usize) -> (f64, f64) {
    if n_fg == 0 || n_bg == 0 {
        return (1.0, 1.0);
    }
    let n = (n_fg + n_bg) as f64;
    (n / (2.0 * n_fg as f64), n / (2.0 * n_bg as f64))
}

fn check<T: Scalar>(values: &Tensor<T>, labels: &LabelMask, op: &'static str) -> Result<usize> {
    if values.len() != labels.len() || values.shape()[0] != 1 {
        return Err(Error::dim(
            op,
            format!("map {:?} vs labels {}x{}", values.shape(), labels.height, labels.width),
        ));
    }
    let valid = labels.len() - labels.count(LabelClass::Void);
    if valid == 0 {
        return Err(Error::NoSupervisedPixels);
    }
    Ok(valid)
}

fn pixel_loss(p: f64, fg: bool, w: f64) -> f64 {
    let p = p.clamp(CLIP, 1.0 - CLIP);
    -w * if fg { p.ln() } else { (1.0 - p).ln() }
}

/// Mean weighted BCE over non-void pixels and its gradient with respect to
/// the probabilities (evaluated at the clipped values; zero on void).
pub fn weighted_bce<T: Scalar>(probs: &Tensor<T>, labels: &LabelMask, w_fg: f64, w_bg: f64) -> Result<(f64, Tensor<T>)> {
    let m = check(probs, labels, "weighted_bce")? as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(probs.len());
    for (&p, &c) in probs.data().iter().zip(labels.classes()) {
        let p = p.to_f64().unwrap();
        let g = match c {
            LabelClass::Void => 0.0,
            LabelClass::Foreground => {
                loss += pixel_loss(p, true, w_fg);
                -w_fg / (m * p.clamp(CLIP, 1.0 - CLIP))
            }
            LabelClass::Background => {
                loss += pixel_loss(p, false, w_bg);
                w_bg / (m * (1.0 - p.clamp(CLIP, 1.0 - CLIP)))
            }
        };
        grad.push(T::from_f64_lossy(g));
    }
    Ok((loss / m, Tensor::new(probs.shape().to_vec(), grad)?))
}

/// Same loss, with the gradient taken through the sigmoid in closed form:
/// `w (p - y) / M` per valid pixel, with respect to the logits.
pub fn weighted_bce_logits<T: Scalar>(probs: &Tensor<T>, labels: &LabelMask, w_fg: f64, w_bg: f64) -> Result<(f64, Tensor<T>)> {
    let m = check(probs, labels, "weighted_bce_logits")? as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(probs.len());
    for (&p, &c) in probs.data().iter().zip(labels.classes()) {
        let p = p.to_f64().unwrap();
        let g = match c {
            LabelClass::Void => 0.0,
            LabelClass::Foreground => {
                loss += pixel_loss(p, true, w_fg);
                w_fg * (p - 1.0) / m
            }
            LabelClass::Background => {
                loss += pixel_loss(p, false, w_bg);
                w_bg * p / m
            }
        };
        grad.push(T::from_f64_lossy(g));
    }
    Ok((loss / m, Tensor::new(probs.shape().to_vec(), grad)?))
}
