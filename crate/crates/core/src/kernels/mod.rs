//! Forward and backward kernels for every layer primitive of the network.

mod activation;
mod concat;
mod conv;
mod dropout;
mod pool;
mod upsample;

pub use activation::{activation_backward, pointwise_activation, sigmoid, Activation};
pub use concat::{concat_depth, split_depth};
pub use conv::{conv2d_backward, conv2d_forward, tconv2d_backward, tconv2d_forward, ConvGrads};
pub use dropout::{dropout, dropout_backward, DropoutMask};
pub use pool::{maxpool2x2_backward, maxpool2x2_forward, ArgmaxMap};
pub use upsample::{upsample_nearest, upsample_nearest_backward};
