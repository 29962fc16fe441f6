use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn pointwise_activation<T: Scalar>(input: &Tensor<T>, kind: Activation) -> Result<Tensor<T>> {
    let out = match kind {
        Activation::Relu => input.map(|v| v.max(T::zero())),
        Activation::Sigmoid => input.map(sigmoid),
    };
    out.ensure_finite(match kind {
        Activation::Relu => "relu",
        Activation::Sigmoid => "sigmoid",
    })
}

/// Gradient w.r.t. the activation input, computed from its cached output.
pub fn activation_backward<T: Scalar>(
    output: &Tensor<T>,
    grad_out: &Tensor<T>,
    kind: Activation,
) -> Result<Tensor<T>> {
    if output.shape() != grad_out.shape() {
        return Err(Error::dim(
            "activation_backward",
            format!("{:?} vs {:?}", output.shape(), grad_out.shape()),
        ));
    }
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&y, &g)| match kind {
            Activation::Relu => {
                if y > T::zero() {
                    g
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => g * y * (T::one() - y),
        })
        .collect();
    Tensor::new(output.shape().to_vec(), data)
}
