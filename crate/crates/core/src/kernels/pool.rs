use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Flat input offsets of the maximum of each 2x2 window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArgmaxMap {
    pub input_shape: [usize; 3],
    pub indices: Vec<u32>,
}

/// 2x2 max pooling with stride 2. Ties resolve to the first element in
/// row-major window order.
pub fn maxpool2x2_forward<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, ArgmaxMap)> {
    let (c, h, w) = input.chw()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::dim(
            "maxpool2x2",
            format!("spatial extent {h}x{w} must be even on both axes"),
        ));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut indices = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let top = base + 2 * oy * w + 2 * ox;
                let mut best = top;
                for idx in [top + 1, top + w, top + w + 1] {
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                indices.push(best as u32);
            }
        }
    }
    Ok((
        Tensor::new(vec![c, oh, ow], out)?,
        ArgmaxMap {
            input_shape: [c, h, w],
            indices,
        },
    ))
}

/// Routes each output gradient to its window's argmax; zeros elsewhere.
pub fn maxpool2x2_backward<T: Scalar>(argmax: &ArgmaxMap, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if grad_out.len() != argmax.indices.len() {
        return Err(Error::dim(
            "maxpool2x2_backward",
            format!(
                "grad_output has {} elements, forward produced {}",
                grad_out.len(),
                argmax.indices.len()
            ),
        ));
    }
    let mut gx = Tensor::zeros(argmax.input_shape.to_vec());
    let dst = gx.data_mut();
    for (&i, &g) in argmax.indices.iter().zip(grad_out.data()) {
        dst[i as usize] = dst[i as usize] + g;
    }
    Ok(gx)
}
