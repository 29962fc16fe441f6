use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Stacks `(C_i, H, W)` tensors along the channel axis, preserving order.
pub fn concat_depth<T: Scalar>(inputs: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
    let (_, h, w) = first.chw()?;
    let mut channels = 0;
    for t in inputs {
        let (c, th, tw) = t.chw()?;
        if (th, tw) != (h, w) {
            return Err(Error::dim(
                "concat_depth",
                format!("spatial extents {th}x{tw} differ from {h}x{w}"),
            ));
        }
        channels += c;
    }
    let mut data = Vec::with_capacity(channels * h * w);
    for t in inputs {
        data.extend_from_slice(t.data());
    }
    Tensor::new(vec![channels, h, w], data)
}

/// Splits a concatenated gradient back into per-input slices of the given depths.
pub fn split_depth<T: Scalar>(grad: &Tensor<T>, depths: &[usize]) -> Result<Vec<Tensor<T>>> {
    let (c, h, w) = grad.chw()?;
    if depths.iter().sum::<usize>() != c {
        return Err(Error::dim(
            "split_depth",
            format!("depths {depths:?} do not sum to {c}"),
        ));
    }
    let mut offset = 0;
    depths
        .iter()
        .map(|&d| {
            let slice = grad.data()[offset * h * w..(offset + d) * h * w].to_vec();
            offset += d;
            Tensor::new(vec![d, h, w], slice)
        })
        .collect()
}
