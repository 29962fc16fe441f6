//! The scene-specific training loop.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;

use super::loss::{class_weighting_registry, weighted_bce_logits};
use super::optim::{rmsprop_step, OptimizerState, PlateauConfig, RmsPropConfig};
use crate::data::labels::{LabelClass, LabelMask};
use crate::data::pad::{pad_labels, pad_to_multiple_of_4};
use crate::error::{Error, Result};
use crate::layers::{Mode, SeededRng};
use crate::model::{Network, ModelParams, ARCHITECTURE};
use crate::pyramid::build_pyramid;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug)]
pub struct TrainingExample<T = f32> {
    /// Raw `(3, H, W)` RGB in 0-255.
    pub frame: Tensor<T>,
    pub labels: LabelMask,
    pub frame_index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub n_frames: usize,
    pub epochs: usize,
    pub lr: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub val_split: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub min_delta: f64,
    /// Strength for the layers that carry weight decay.
    pub l2: f32,
    pub threshold: f64,
    pub seed: u64,
    /// Name in the class-weighting registry.
    pub class_weighting: String,
    /// Bytes allowed for cached frozen-encoder features; frames beyond the
    /// budget are re-encoded every step.
    pub cache_budget: usize,
}

impl TrainConfig {
    /// Defaults for a run on `n_frames` examples (60 epochs up to 50
    /// frames, 50 epochs above).
    pub fn for_frames(n_frames: usize) -> Self {
        Self {
            n_frames,
            epochs: Self::default_epochs(n_frames),
            lr: 1e-4,
            rho: 0.9,
            epsilon: 1e-8,
            val_split: 0.2,
            plateau_patience: 6,
            plateau_factor: 0.1,
            min_delta: 1e-4,
            l2: 5e-4,
            threshold: 0.8,
            seed: 0,
            class_weighting: "balanced".into(),
            cache_budget: 1 << 30,
        }
    }

    pub fn default_epochs(n_frames: usize) -> usize {
        if n_frames <= 50 {
            60
        } else {
            50
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.val_split > 0.0 && self.val_split < 1.0) {
            return bad("val_split must lie in (0, 1)");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.plateau_patience < 1 {
            return bad("plateau patience must be at least 1");
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad("plateau factor must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.rho) || self.epsilon <= 0.0 {
            return bad("rho must lie in [0, 1) and epsilon be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        class_weighting_registry().get(&self.class_weighting)?;
        Ok(())
    }

    /// Run banner listing the hyperparameters.
    pub fn banner(&self) -> String {
        format!(
            "frames={} epochs={} lr={:e} rho={} eps={:e} val-split={} patience={} factor={} min-delta={:e} l2={:e} threshold={} weighting={} seed={}",
            self.n_frames,
            self.epochs,
            self.lr,
            self.rho,
            self.epsilon,
            self.val_split,
            self.plateau_patience,
            self.plateau_factor,
            self.min_delta,
            self.l2,
            self.threshold,
            self.class_weighting,
            self.seed
        )
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_frames(50)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept (lowest validation loss).
    pub checkpoint_epoch: usize,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,lr,checkpoint\n");
        for r in &self.epochs {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.epoch,
                r.train_loss,
                r.val_loss,
                r.lr,
                (r.epoch == self.checkpoint_epoch) as u8
            );
        }
        s
    }
}

/// A padded example with its class weights and, when cached, the frozen
/// encoder outputs of its three scales.
struct Prepared<T: Scalar> {
    frame: Tensor<T>,
    labels: LabelMask,
    frame_index: usize,
    weights: (f64, f64),
    prefixes: Option<[Tensor<T>; 3]>,
}

impl<T: Scalar> Prepared<T> {
    fn prefixes(&self, net: &Network<T>) -> Result<[Tensor<T>; 3]> {
        if let Some(p) = &self.prefixes {
            return Ok(p.clone());
        }
        let pyr = build_pyramid(&self.frame)?;
        Ok([
            net.encode_prefix(pyr.full())?,
            net.encode_prefix(pyr.half())?,
            net.encode_prefix(pyr.quarter())?,
        ])
    }

    fn loss_and_grad(&self, net: &Network<T>, mode: &mut Mode<'_>) -> Result<(f64, crate::model::ForwardPass<T>, Tensor<T>)> {
        let p = self.prefixes(net)?;
        let pass = net.forward_from_prefixes([&p[0], &p[1], &p[2]], mode)?;
        let (loss, grad) = weighted_bce_logits(&pass.probs, &self.labels, self.weights.0, self.weights.1)?;
        Ok((loss, pass, grad))
    }
}

fn prefix_bytes<T: Scalar>(h: usize, w: usize) -> usize {
    // block-3 output has 256 channels at a quarter of each scale's extent
    let per_scale = |s: usize| 256 * (h / s / 4) * (w / s / 4);
    (per_scale(1) + per_scale(2) + per_scale(4)) * std::mem::size_of::<T>()
}

/// Called after each epoch with its record.
pub type EpochObserver<'a> = dyn FnMut(&EpochRecord) + 'a;

pub fn train<T: Scalar>(
    config: &TrainConfig,
    examples: &[TrainingExample<T>],
    params: ModelParams<T>,
) -> Result<(ModelParams<T>, TrainHistory)> {
    train_with_observer(config, examples, params, &mut |_| {})
}

/// Shuffles once and splits train/validation, then per epoch reshuffles the
/// training order, takes one RMSProp step per frame, evaluates validation
/// loss in inference mode, keeps the best weights and applies the plateau
/// schedule. Returns the best weights.
pub fn train_with_observer<T: Scalar>(
    config: &TrainConfig,
    examples: &[TrainingExample<T>],
    mut params: ModelParams<T>,
    observer: &mut EpochObserver<'_>,
) -> Result<(ModelParams<T>, TrainHistory)> {
    config.validate()?;
    if examples.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "training needs at least 5 examples, got {}",
            examples.len()
        )));
    }
    let weighting = class_weighting_registry().get(&config.class_weighting)?.clone();
    for (def, layer) in ARCHITECTURE.iter().zip(params.layers.iter_mut()) {
        if def.l2 {
            layer.l2 = config.l2;
        }
    }

    let mut prepared = Vec::with_capacity(examples.len());
    for ex in examples {
        let (c, h, w) = ex.frame.chw()?;
        if c != 3 || h != ex.labels.height || w != ex.labels.width {
            return Err(Error::dim(
                "train",
                format!(
                    "frame {} is {:?} but its labels are {}x{}",
                    ex.frame_index,
                    ex.frame.shape(),
                    ex.labels.height,
                    ex.labels.width
                ),
            ));
        }
        let labels = pad_labels(&ex.labels)?;
        if labels.count(LabelClass::Void) == labels.len() {
            return Err(Error::InvalidArgument(format!(
                "frame {} has no supervised pixels",
                ex.frame_index
            )));
        }
        prepared.push(Prepared {
            frame: pad_to_multiple_of_4(&ex.frame)?.0,
            weights: weighting.weights(&labels),
            labels,
            frame_index: ex.frame_index,
            prefixes: None,
        });
    }

    let mut net = Network::new(params)?;
    let mut budget = config.cache_budget;
    let mut to_cache = Vec::new();
    for (i, p) in prepared.iter().enumerate() {
        let (_, h, w) = p.frame.chw()?;
        let need = prefix_bytes::<T>(h, w);
        if need <= budget {
            budget -= need;
            to_cache.push(i);
        }
    }
    let cached: Vec<[Tensor<T>; 3]> = to_cache
        .par_iter()
        .map(|&i| prepared[i].prefixes(&net))
        .collect::<Result<_>>()?;
    for (i, c) in to_cache.into_iter().zip(cached) {
        prepared[i].prefixes = Some(c);
    }
    log::debug!("cached encoder features for {} of {} frames", prepared.iter().filter(|p| p.prefixes.is_some()).count(), prepared.len());

    let mut shuffle_rng = SeededRng::seed_from_u64(config.seed);
    let mut dropout_rng = SeededRng::seed_from_u64(config.seed);
    dropout_rng.set_stream(2);

    let mut order: Vec<usize> = (0..prepared.len()).collect();
    order.shuffle(&mut shuffle_rng);
    let n_train = ((prepared.len() as f64) * (1.0 - config.val_split)).floor() as usize;
    let n_train = n_train.clamp(1, prepared.len() - 1);
    let (train_set, val_set) = order.split_at(n_train);
    let mut train_order = train_set.to_vec();

    let mut state = OptimizerState::new(net.params(), config.lr, RmsPropConfig { rho: config.rho, epsilon: config.epsilon });
    let plateau = PlateauConfig {
        patience: config.plateau_patience,
        factor: config.plateau_factor,
        min_delta: config.min_delta,
    };
    let mut history = TrainHistory {
        train_indices: train_set.iter().map(|&i| prepared[i].frame_index).collect(),
        val_indices: val_set.iter().map(|&i| prepared[i].frame_index).collect(),
        ..Default::default()
    };
    let mut best: Option<(f64, ModelParams<T>)> = None;

    for epoch in 0..config.epochs {
        train_order.shuffle(&mut shuffle_rng);
        let lr = state.lr;
        let mut train_sum = 0.0;
        for (step, &i) in train_order.iter().enumerate() {
            let ex = &prepared[i];
            let (loss, pass, grad) = ex.loss_and_grad(&net, &mut Mode::Training(&mut dropout_rng))?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    context: format!("epoch {epoch} step {step} (frame {})", ex.frame_index),
                });
            }
            let grads = net.backward(&pass, &grad)?;
            rmsprop_step(net.params_mut(), &grads, &mut state)?;
            train_sum += loss;
        }

        let val_losses: Vec<f64> = val_set
            .par_iter()
            .map(|&i| prepared[i].loss_and_grad(&net, &mut Mode::Inference).map(|r| r.0))
            .collect::<Result<_>>()?;
        let val_loss = val_losses.iter().sum::<f64>() / val_losses.len() as f64;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                context: format!("epoch {epoch} validation"),
            });
        }
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, net.params().clone()));
            history.checkpoint_epoch = epoch;
        }
        state.end_epoch(val_loss, &plateau);

        let record = EpochRecord {
            epoch,
            train_loss: train_sum / train_order.len() as f64,
            val_loss,
            lr,
        };
        log::info!(
            "epoch {epoch}: train {:.6} val {:.6} lr {:e}",
            record.train_loss,
            record.val_loss,
            lr
        );
        observer(&record);
        history.epochs.push(record);
    }
    let (_, params) = best.expect("at least one epoch");
    Ok((params, history))
}

/// Mean weighted loss of `params` over examples in inference mode.
pub fn evaluate_loss<T: Scalar>(params: &ModelParams<T>, examples: &[TrainingExample<T>], weighting: &str) -> Result<f64> {
    let weighting = class_weighting_registry().get(weighting)?.clone();
    let net = Network::new(params.clone())?;
    let losses: Vec<f64> = examples
        .par_iter()
        .map(|ex| {
            let (frame, _) = pad_to_multiple_of_4(&ex.frame)?;
            let labels = pad_labels(&ex.labels)?;
            let (wf, wb) = weighting.weights(&labels);
            let probs = net.predict(&frame)?;
            Ok(super::loss::weighted_bce(&probs, &labels, wf, wb)?.0)
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_defaults() {
        assert_eq!(TrainConfig::for_frames(50).epochs, 60);
        assert_eq!(TrainConfig::for_frames(200).epochs, 50);
        let c = TrainConfig::default();
        assert_eq!((c.lr, c.rho, c.epsilon, c.val_split, c.threshold), (1e-4, 0.9, 1e-8, 0.2, 0.8));
        assert!(c.banner().contains("lr=1e-4"));
        assert!(c.banner().contains("eps=1e-8"));
        assert!(c.banner().contains("val-split=0.2"));
        assert!(c.banner().contains("threshold=0.8"));
    }

    #[test]
    fn config_validation() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { val_split: 0.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { lr: 0.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { plateau_patience: 0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { class_weighting: "nope".into(), ..ok }.validate().is_err());
    }

    #[test]
    fn too_few_examples() {
        let ex = TrainingExample {
            frame: Tensor::<f32>::zeros(vec![3, 8, 8]),
            labels: LabelMask::from_codes(8, 8, vec![0; 64]).unwrap(),
            frame_index: 0,
        };
        let params = crate::model::build_model::<f32>(None, 0).unwrap();
        let err = train(&TrainConfig::default(), &vec![ex; 4], params).unwrap_err();
        assert!(err.to_string().contains("at least 5"));
    }

    #[test]
    fn prefix_size_estimate() {
        assert_eq!(prefix_bytes::<f32>(64, 64), 256 * (256 + 64 + 16) * 4);
    }
}
