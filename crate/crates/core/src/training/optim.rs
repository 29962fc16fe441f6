//! RMSProp with per-layer L2 and a reduce-on-plateau learning-rate schedule.

use crate::error::{Error, Result};
use crate::model::{ModelParams, ParamGrads};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmsPropConfig {
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self { rho: 0.9, epsilon: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlateauConfig {
    pub patience: usize,
    pub factor: f64,
    pub min_delta: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self {
            patience: 6,
            factor: 0.1,
            min_delta: 1e-4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizerState<T> {
    /// Squared-gradient averages for `(weights, bias)`; `None` on frozen layers.
    pub accumulators: Vec<Option<(Tensor<T>, Tensor<T>)>>,
    pub lr: f64,
    pub config: RmsPropConfig,
    /// Epochs since the validation loss last improved by `min_delta`.
    pub wait: usize,
    pub best_val: f64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &ModelParams<T>, lr: f64, config: RmsPropConfig) -> Self {
        Self {
            accumulators: params
                .layers
                .iter()
                .map(|l| {
                    l.trainable
                        .then(|| (Tensor::zeros(l.weights.shape().to_vec()), Tensor::zeros(l.bias.shape().to_vec())))
                })
                .collect(),
            lr,
            config,
            wait: 0,
            best_val: f64::INFINITY,
        }
    }

    /// Plateau bookkeeping after an epoch. Returns true if the rate was cut.
    pub fn end_epoch(&mut self, val_loss: f64, plateau: &PlateauConfig) -> bool {
        if val_loss < self.best_val - plateau.min_delta {
            self.best_val = val_loss;
            self.wait = 0;
            return false;
        }
        self.wait += 1;
        if self.wait >= plateau.patience {
            self.lr *= plateau.factor;
            self.wait = 0;
            return true;
        }
        false
    }
}

fn update<T: Scalar>(w: &mut Tensor<T>, g: &Tensor<T>, acc: &mut Tensor<T>, l2: T, lr: T, rho: T, eps: T) {
    let one = T::one();
    for ((w, &g), a) in w.data_mut().iter_mut().zip(g.data()).zip(acc.data_mut()) {
        let g = g + l2 * *w;
        *a = rho * *a + (one - rho) * g * g;
        *w = *w - lr * g / (a.sqrt() + eps);
    }
}

/// One RMSProp update. Gradients must be present for exactly the trainable
/// layers; L2 applies to weights only. Frozen layers are never written.
pub fn rmsprop_step<T: Scalar>(params: &mut ModelParams<T>, grads: &ParamGrads<T>, state: &mut OptimizerState<T>) -> Result<()> {
    if grads.layers.len() != params.layers.len() || state.accumulators.len() != params.layers.len() {
        return Err(Error::InvalidArgument("gradient/optimizer layer count mismatch".into()));
    }
    for (layer, g) in params.layers.iter().zip(&grads.layers) {
        match g {
            Some((gw, gb)) if layer.trainable => {
                if gw.shape() != layer.weights.shape() || gb.shape() != layer.bias.shape() {
                    return Err(Error::Layer {
                        layer: layer.name.clone(),
                        detail: "gradient shape mismatch".into(),
                    });
                }
                if !gw.all_finite() || !gb.all_finite() {
                    return Err(Error::Layer {
                        layer: layer.name.clone(),
                        detail: "non-finite gradient, step aborted".into(),
                    });
                }
            }
            None if !layer.trainable => {}
            _ => {
                return Err(Error::Layer {
                    layer: layer.name.clone(),
                    detail: format!(
                        "gradient {} for a {} layer",
                        if g.is_some() { "present" } else { "missing" },
                        if layer.trainable { "trainable" } else { "frozen" }
                    ),
                })
            }
        }
    }
    let lr = T::from_f64_lossy(state.lr);
    let rho = T::from_f64_lossy(state.config.rho);
    let eps = T::from_f64_lossy(state.config.epsilon);
    for ((layer, g), acc) in params.layers.iter_mut().zip(&grads.layers).zip(&mut state.accumulators) {
        let (Some((gw, gb)), Some((aw, ab))) = (g, acc) else {
            continue;
        };
        update(&mut layer.weights, gw, aw, T::from_f64_lossy(layer.l2 as f64), lr, rho, eps);
        update(&mut layer.bias, gb, ab, T::zero(), lr, rho, eps);
    }
    Ok(())
}
