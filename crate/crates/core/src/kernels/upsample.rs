use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Nearest-neighbour upscaling: each pixel becomes a `factor x factor` block.
pub fn upsample_nearest<T: Scalar>(input: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    if factor < 1 {
        return Err(Error::InvalidArgument("upsample factor must be >= 1".into()));
    }
    let (c, h, w) = input.chw()?;
    if factor == 1 {
        return Ok(input.clone());
    }
    let (oh, ow) = (h * factor, w * factor);
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            let row = &x[(ch * h + oy / factor) * w..(ch * h + oy / factor + 1) * w];
            out.extend(row.iter().flat_map(|&v| std::iter::repeat_n(v, factor)));
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

/// Sums each `factor x factor` block of the gradient back onto its source pixel.
pub fn upsample_nearest_backward<T: Scalar>(grad_out: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    if factor < 1 {
        return Err(Error::InvalidArgument("upsample factor must be >= 1".into()));
    }
    let (c, oh, ow) = grad_out.chw()?;
    if oh % factor != 0 || ow % factor != 0 {
        return Err(Error::dim(
            "upsample_backward",
            format!("{oh}x{ow} not divisible by {factor}"),
        ));
    }
    let (h, w) = (oh / factor, ow / factor);
    let g = grad_out.data();
    let mut out = vec![T::zero(); c * h * w];
    for ch in 0..c {
        for oy in 0..oh {
            let dst = &mut out[(ch * h + oy / factor) * w..(ch * h + oy / factor + 1) * w];
            for (ox, &v) in g[(ch * oh + oy) * ow..(ch * oh + oy + 1) * ow].iter().enumerate() {
                dst[ox / factor] = dst[ox / factor] + v;
            }
        }
    }
    Tensor::new(vec![c, h, w], out)
}
