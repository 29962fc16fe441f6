//! Confusion counts, the CDnet metric set, threshold sweeps and
//! video/category/overall aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::labels::{LabelClass, LabelMask};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Self::merge)
    }
}

/// Counts over non-void pixels; foreground is the positive class.
pub fn accumulate(pred: &[bool], labels: &LabelMask) -> Result<ConfusionCounts> {
    if pred.len() != labels.len() {
        return Err(Error::dim(
            "accumulate",
            format!("{} predictions for {} labels", pred.len(), labels.len()),
        ));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &l) in pred.iter().zip(labels.classes()) {
        match (l, p) {
            (LabelClass::Void, _) => {}
            (LabelClass::Foreground, true) => c.tp += 1,
            (LabelClass::Foreground, false) => c.fn_ += 1,
            (LabelClass::Background, true) => c.fp += 1,
            (LabelClass::Background, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Binarizes with `p > threshold` and counts.
pub fn accumulate_probs<T: Scalar>(probs: &Tensor<T>, labels: &LabelMask, threshold: f64) -> Result<ConfusionCounts> {
    let t = T::from_f64_lossy(threshold);
    let pred: Vec<bool> = probs.data().iter().map(|&p| p > t).collect();
    accumulate(&pred, labels)
}

/// Which metrics hit a zero denominator and were reported as 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Degeneracy {
    pub recall: bool,
    pub specificity: bool,
    pub fpr: bool,
    pub fnr: bool,
    pub pwc: bool,
    pub precision: bool,
    pub f_measure: bool,
    pub mcc: bool,
}

impl Degeneracy {
    pub fn any(&self) -> bool {
        self.recall || self.specificity || self.fpr || self.fnr || self.pwc || self.precision || self.f_measure || self.mcc
    }

    fn union(self, o: Self) -> Self {
        Self {
            recall: self.recall || o.recall,
            specificity: self.specificity || o.specificity,
            fpr: self.fpr || o.fpr,
            fnr: self.fnr || o.fnr,
            pwc: self.pwc || o.pwc,
            precision: self.precision || o.precision,
            f_measure: self.f_measure || o.f_measure,
            mcc: self.mcc || o.mcc,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub recall: f64,
    pub specificity: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub pwc: f64,
    pub precision: f64,
    pub f_measure: f64,
    pub mcc: f64,
    pub degenerate: Degeneracy,
}

pub const METRIC_NAMES: [&str; 8] = ["Recall", "Specificity", "FPR", "FNR", "PWC", "Precision", "F-Measure", "MCC"];

impl MetricsReport {
    /// Values in [`METRIC_NAMES`] order.
    pub fn values(&self) -> [f64; 8] {
        [
            self.recall,
            self.specificity,
            self.fpr,
            self.fnr,
            self.pwc,
            self.precision,
            self.f_measure,
            self.mcc,
        ]
    }

    fn from_values(v: [f64; 8], degenerate: Degeneracy) -> Self {
        Self {
            recall: v[0],
            specificity: v[1],
            fpr: v[2],
            fnr: v[3],
            pwc: v[4],
            precision: v[5],
            f_measure: v[6],
            mcc: v[7],
            degenerate,
        }
    }
}

fn ratio(num: f64, den: f64, flag: &mut bool) -> f64 {
    if den == 0.0 {
        *flag = true;
        0.0
    } else {
        num / den
    }
}

pub fn compute_metrics(c: ConfusionCounts) -> MetricsReport {
    let (tp, fp, fn_, tn) = (c.tp as f64, c.fp as f64, c.fn_ as f64, c.tn as f64);
    let mut d = Degeneracy::default();
    let recall = ratio(tp, tp + fn_, &mut d.recall);
    let specificity = ratio(tn, tn + fp, &mut d.specificity);
    let fpr = ratio(fp, fp + tn, &mut d.fpr);
    let fnr = ratio(fn_, tp + fn_, &mut d.fnr);
    let pwc = 100.0 * ratio(fn_ + fp, tp + fn_ + fp + tn, &mut d.pwc);
    let precision = ratio(tp, tp + fp, &mut d.precision);
    let f_measure = if d.recall || d.precision {
        d.f_measure = true;
        0.0
    } else {
        ratio(2.0 * precision * recall, precision + recall, &mut d.f_measure)
    };
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    let mcc = ratio(tp * tn - fp * fn_, den, &mut d.mcc).clamp(-1.0, 1.0);
    MetricsReport {
        recall,
        specificity,
        fpr,
        fnr,
        pwc,
        precision,
        f_measure,
        mcc,
        degenerate: d,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub threshold: f64,
    pub counts: ConfusionCounts,
    pub report: MetricsReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Threshold with the highest F-Measure (first one on ties).
    pub best_threshold: f64,
    pub best_f: f64,
}

/// Evenly spaced thresholds `step, 2*step, ...` strictly below 1.
pub fn threshold_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round() as usize;
    (1..n).map(|i| i as f64 * step).collect()
}

pub fn threshold_sweep<T: Scalar>(probs: &[Tensor<T>], labels: &[LabelMask], thresholds: &[f64]) -> Result<SweepReport> {
    if probs.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} probability maps for {} label masks",
            probs.len(),
            labels.len()
        )));
    }
    if thresholds.is_empty()
        || thresholds.iter().any(|&t| !(t > 0.0 && t < 1.0))
        || thresholds.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::InvalidArgument("thresholds must be strictly increasing in (0, 1)".into()));
    }
    let per_frame: Vec<Vec<ConfusionCounts>> = probs
        .par_iter()
        .zip(labels.par_iter())
        .map(|(p, l)| thresholds.iter().map(|&t| accumulate_probs(p, l, t)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = thresholds
        .iter()
        .enumerate()
        .map(|(k, &threshold)| {
            let counts: ConfusionCounts = per_frame.iter().map(|f| f[k]).sum();
            SweepRow {
                threshold,
                counts,
                report: compute_metrics(counts),
            }
        })
        .collect();
    let best = rows
        .iter()
        .fold(&rows[0], |b, r| if r.report.f_measure > b.report.f_measure { r } else { b });
    Ok(SweepReport {
        best_threshold: best.threshold,
        best_f: best.report.f_measure,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoReport {
    pub name: String,
    pub report: MetricsReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub videos: BTreeMap<String, Vec<VideoReport>>,
    pub categories: BTreeMap<String, MetricsReport>,
    pub overall: MetricsReport,
}

/// Unweighted mean; inputs are summed in sorted order so the result does
/// not depend on their arrangement.
fn mean_report<'a>(reports: impl Iterator<Item = &'a MetricsReport>) -> MetricsReport {
    let reports: Vec<&MetricsReport> = reports.collect();
    let n = reports.len() as f64;
    let values = std::array::from_fn(|k| {
        let mut v: Vec<f64> = reports.iter().map(|r| r.values()[k]).collect();
        v.sort_by(f64::total_cmp);
        v.iter().sum::<f64>() / n
    });
    let degenerate = reports.iter().fold(Degeneracy::default(), |d, r| d.union(r.degenerate));
    MetricsReport::from_values(values, degenerate)
}

/// Video metrics averaged per category, categories averaged overall.
pub fn aggregate(by_category: BTreeMap<String, Vec<VideoReport>>) -> Result<Aggregate> {
    if by_category.is_empty() {
        return Err(Error::InvalidArgument("no categories to aggregate".into()));
    }
    let mut categories = BTreeMap::new();
    for (name, videos) in &by_category {
        if videos.is_empty() {
            return Err(Error::InvalidArgument(format!("category {name} has no videos")));
        }
        categories.insert(name.clone(), mean_report(videos.iter().map(|v| &v.report)));
    }
    let overall = mean_report(categories.values());
    Ok(Aggregate {
        videos: by_category,
        categories,
        overall,
    })
}

impl Aggregate {
    fn rows(&self) -> Vec<(&'static str, String, &MetricsReport)> {
        let mut rows = Vec::new();
        for (cat, videos) in &self.videos {
            for v in videos {
                rows.push(("video", format!("{cat}/{}", v.name), &v.report));
            }
        }
        for (cat, r) in &self.categories {
            rows.push(("category", cat.clone(), r));
        }
        rows.push(("overall", "overall".to_string(), &self.overall));
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("Level,Name,{}\n", METRIC_NAMES.join(","));
        for (level, name, r) in self.rows() {
            let vals: Vec<String> = r.values().iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(s, "{level},{name},{}", vals.join(","));
        }
        s
    }

    pub fn to_table(&self) -> String {
        let rows = self.rows();
        let width = rows.iter().map(|r| r.1.len()).max().unwrap_or(4).max(4);
        let mut s = format!("{:<9} {:<width$}", "level", "name");
        for n in METRIC_NAMES {
            let _ = write!(s, " {n:>11}");
        }
        s.push('\n');
        for (level, name, r) in rows {
            let _ = write!(s, "{level:<9} {name:<width$}");
            for v in r.values() {
                let _ = write!(s, " {v:>11.4}");
            }
            if r.degenerate.any() {
                s.push_str("  *");
            }
            s.push('\n');
        }
        s
    }
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("Threshold,TP,FP,FN,TN,{}\n", METRIC_NAMES.join(","));
        for r in &self.rows {
            let vals: Vec<String> = r.report.values().iter().map(|v| format!("{v:.6}")).collect();
            let c = r.counts;
            let _ = writeln!(s, "{:.4},{},{},{},{},{}", r.threshold, c.tp, c.fp, c.fn_, c.tn, vals.join(","));
        }
        s
    }
}
