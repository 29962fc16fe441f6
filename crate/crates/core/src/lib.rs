pub mod error;
pub mod kernels;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{ConvSpec, Scalar, Tensor};
pub mod layers;
pub mod registry;
pub mod pyramid;
pub mod model;
pub mod data;
pub mod metrics;
pub mod weights;
pub mod training;
