use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Per-element multiplier applied by a training-mode dropout pass: zero for
/// dropped elements, `1 / (1 - rate)` for survivors.
#[derive(Clone, Debug)]
pub struct DropoutMask<T> {
    pub scale: Vec<T>,
}

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")))
    }
}

/// Inverted dropout. Inference mode, or a zero rate, is the identity and
/// returns no mask.
pub fn dropout<T: Scalar, R: Rng + ?Sized>(
    input: &Tensor<T>,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<(Tensor<T>, Option<DropoutMask<T>>)> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok((input.clone(), None));
    }
    let keep = T::from_f64_lossy(1.0 / (1.0 - rate));
    let scale: Vec<T> = (0..input.len())
        .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
        .collect();
    let data = input.data().iter().zip(&scale).map(|(&x, &s)| x * s).collect();
    Ok((
        Tensor::new(input.shape().to_vec(), data)?,
        Some(DropoutMask { scale }),
    ))
}

pub fn dropout_backward<T: Scalar>(mask: Option<&DropoutMask<T>>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let Some(mask) = mask else {
        return Ok(grad_out.clone());
    };
    if mask.scale.len() != grad_out.len() {
        return Err(Error::dim(
            "dropout_backward",
            format!("mask has {} elements, grad {}", mask.scale.len(), grad_out.len()),
        ));
    }
    let data = grad_out.data().iter().zip(&mask.scale).map(|(&g, &s)| g * s).collect();
    Tensor::new(grad_out.shape().to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inference_and_zero_rate_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::<f32>::from_fn(vec![2, 3, 3], |i| i as f32);
        assert_eq!(dropout(&x, 0.5, false, &mut rng).unwrap().0, x);
        assert_eq!(dropout(&x, 0.0, true, &mut rng).unwrap().0, x);
    }

    #[test]
    fn rate_out_of_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::<f32>::zeros(vec![1]);
        assert!(dropout(&x, 1.0, true, &mut rng).is_err());
        assert!(dropout(&x, -0.1, false, &mut rng).is_err());
    }

    #[test]
    fn survivors_rescaled_mean_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x = Tensor::<f64>::full(vec![1_000_000], 1.0);
        let (y, mask) = dropout(&x, 0.5, true, &mut rng).unwrap();
        let mean = y.mean();
        assert!((0.99..=1.01).contains(&mean), "mean {mean}");
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
        let g = Tensor::full(vec![1_000_000], 1.0);
        assert_eq!(dropout_backward(mask.as_ref(), &g).unwrap(), y);
    }
}
