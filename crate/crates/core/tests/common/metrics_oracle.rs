//! Metrics recomputed from their textbook definitions, pixel by pixel.

use fgseg::data::labels::LabelMask;

/// `(tp, fp, fn, tn)` by walking raw label codes: 255 positive, 0 and 50
/// negative, everything else ignored.
pub fn count(pred: &[bool], labels: &LabelMask) -> (u64, u64, u64, u64) {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (i, &code) in labels.raw().iter().enumerate() {
        let positive = match code {
            255 => true,
            0 | 50 => false,
            _ => continue,
        };
        match (positive, pred[i]) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    (tp, fp, fn_, tn)
}

fn div(a: f64, b: f64) -> f64 {
    if b == 0.0 { 0.0 } else { a / b }
}

pub fn precision(tp: f64, fp: f64) -> f64 {
    div(tp, tp + fp)
}

pub fn recall(tp: f64, fn_: f64) -> f64 {
    div(tp, tp + fn_)
}

/// Harmonic mean of precision and recall.
pub fn f_measure(tp: f64, fp: f64, fn_: f64) -> f64 {
    let (p, r) = (precision(tp, fp), recall(tp, fn_));
    div(2.0 * p * r, p + r)
}

/// Percentage of wrong classifications.
pub fn pwc(tp: f64, fp: f64, fn_: f64, tn: f64) -> f64 {
    div(100.0 * (fn_ + fp), tp + fn_ + fp + tn)
}

pub fn mcc(tp: f64, fp: f64, fn_: f64, tn: f64) -> f64 {
    div(
        tp * tn - fp * fn_,
        ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt(),
    )
}

pub fn specificity(fp: f64, tn: f64) -> f64 {
    div(tn, tn + fp)
}
