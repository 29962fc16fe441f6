//! Frame selection, class-weighted loss, RMSProp and the training loop.

pub mod loss;
pub mod optim;
pub mod selection;
pub mod train;

pub use loss::{class_weighting_registry, class_weights, weighted_bce, weighted_bce_logits, ClassWeighting};
pub use optim::{rmsprop_step, OptimizerState, PlateauConfig, RmsPropConfig};
pub use selection::{parse_manifest, select_frames, FrameSelector, ManifestSelector, RandomSelector};
pub use train::{evaluate_loss, train, train_with_observer, EpochRecord, TrainConfig, TrainHistory, TrainingExample};
