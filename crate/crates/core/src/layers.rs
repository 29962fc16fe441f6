//! Layer primitives behind a common trait, constructed by kind name.
//!
//! Each [`Layer`] is stateless: learnable tensors are passed in through
//! [`ParamRef`] and everything the backward pass needs is returned from
//! `forward` as a [`Context`]. That lets one encoder definition serve the
//! three weight-sharing scale paths, each with its own contexts.

use std::fmt::Debug;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::{self, Activation, ArgmaxMap, DropoutMask};
use crate::registry::Registry;
use crate::tensor::{ConvSpec, Scalar, Tensor};

pub type SeededRng = ChaCha8Rng;

/// Whether stochastic layers are active. Training carries the dropout RNG.
pub enum Mode<'a> {
    Inference,
    Training(&'a mut SeededRng),
}

impl Mode<'_> {
    pub fn is_training(&self) -> bool {
        matches!(self, Mode::Training(_))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ParamRef<'a, T> {
    pub weights: &'a Tensor<T>,
    pub bias: &'a Tensor<T>,
}

/// Forward state retained for the backward pass.
#[derive(Clone, Debug)]
pub enum Context<T> {
    Input(Tensor<T>),
    Output(Tensor<T>),
    Argmax(ArgmaxMap),
    Dropout(Option<DropoutMask<T>>),
    Empty,
}

#[derive(Clone, Debug, Default)]
pub struct LayerGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weights: Option<Tensor<T>>,
    pub bias: Option<Tensor<T>>,
}

/// Which gradients a backward call must produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GradRequest {
    pub input: bool,
    pub params: bool,
}

impl GradRequest {
    pub const ALL: Self = Self {
        input: true,
        params: true,
    };
}

pub trait Layer<T: Scalar>: Send + Sync + Debug {
    fn kind(&self) -> &'static str;

    /// Geometry of parameterized layers; `None` for parameter-free ones.
    fn conv_spec(&self) -> Option<&ConvSpec> {
        None
    }

    fn output_shape(&self, input: [usize; 3]) -> Result<[usize; 3]>;

    fn forward(
        &self,
        input: &Tensor<T>,
        params: Option<ParamRef<'_, T>>,
        mode: &mut Mode<'_>,
    ) -> Result<(Tensor<T>, Context<T>)>;

    fn backward(
        &self,
        ctx: &Context<T>,
        params: Option<ParamRef<'_, T>>,
        grad_out: &Tensor<T>,
        request: GradRequest,
    ) -> Result<LayerGrads<T>>;
}

fn need_params<'a, T>(kind: &'static str, params: Option<ParamRef<'a, T>>) -> Result<ParamRef<'a, T>> {
    params.ok_or_else(|| Error::InvalidArgument(format!("{kind} layer called without parameters")))
}

#[derive(Debug)]
pub struct Conv2d {
    pub spec: ConvSpec,
}

impl<T: Scalar> Layer<T> for Conv2d {
    fn kind(&self) -> &'static str {
        "conv2d"
    }

    fn conv_spec(&self) -> Option<&ConvSpec> {
        Some(&self.spec)
    }

    fn output_shape(&self, [_, h, w]: [usize; 3]) -> Result<[usize; 3]> {
        let (oh, ow) = self.spec.conv_output(h, w)?;
        Ok([self.spec.out_channels, oh, ow])
    }

    fn forward(
        &self,
        input: &Tensor<T>,
        params: Option<ParamRef<'_, T>>,
        _mode: &mut Mode<'_>,
    ) -> Result<(Tensor<T>, Context<T>)> {
        let p = need_params("conv2d", params)?;
        let out = kernels::conv2d_forward(input, p.weights, p.bias, &self.spec)?;
        Ok((out, Context::Input(input.clone())))
    }

    fn backward(
        &self,
        ctx: &Context<T>,
        params: Option<ParamRef<'_, T>>,
        grad_out: &Tensor<T>,
        request: GradRequest,
    ) -> Result<LayerGrads<T>> {
        let Context::Input(input) = ctx else {
            return Err(Error::MissingContext("conv2d"));
        };
        let p = need_params("conv2d", params)?;
        let g = kernels::conv2d_backward(input, p.weights, grad_out, &self.spec, request.input)?;
        Ok(split_param_grads(g, request))
    }
}

#[derive(Debug)]
pub struct TConv2d {
    pub spec: ConvSpec,
}

impl<T: Scalar> Layer<T> for TConv2d {
    fn kind(&self) -> &'static str {
        "tconv2d"
    }

    fn conv_spec(&self) -> Option<&ConvSpec> {
        Some(&self.spec)
    }

    fn output_shape(&self, [_, h, w]: [usize; 3]) -> Result<[usize; 3]> {
        let (oh, ow) = self.spec.tconv_output(h, w)?;
        Ok([self.spec.out_channels, oh, ow])
    }

    fn forward(
        &self,
        input: &Tensor<T>,
        params: Option<ParamRef<'_, T>>,
        _mode: &mut Mode<'_>,
    ) -> Result<(Tensor<T>, Context<T>)> {
        let p = need_params("tconv2d", params)?;
        let out = kernels::tconv2d_forward(input, p.weights, p.bias, &self.spec)?;
        Ok((out, Context::Input(input.clone())))
    }

    fn backward(
        &self,
        ctx: &Context<T>,
        params: Option<ParamRef<'_, T>>,
        grad_out: &Tensor<T>,
        request: GradRequest,
    ) -> Result<LayerGrads<T>> {
        let Context::Input(input) = ctx else {
            return Err(Error::MissingContext("tconv2d"));
        };
        let p = need_params("tconv2d", params)?;
        let g = kernels::tconv2d_backward(input, p.weights, grad_out, &self.spec, request.input)?;
        Ok(split_param_grads(g, request))
    }
}

fn split_param_grads<T>(g: kernels::ConvGrads<T>, request: GradRequest) -> LayerGrads<T> {
    LayerGrads {
        input: g.input,
        weights: request.params.then_some(g.weights),
        bias: request.params.then_some(g.bias),
    }
}

#[derive(Debug)]
pub struct MaxPool2x2;

impl<T: Scalar> Layer<T> for MaxPool2x2 {
    fn kind(&self) -> &'static str {
        "maxpool2x2"
    }

    fn output_shape(&self, [c, h, w]: [usize; 3]) -> Result<[usize; 3]> {
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::dim("maxpool2x2", format!("odd extent {h}x{w}")));
        }
        Ok([c, h / 2, w / 2])
    }

    fn forward(
        &self,
        input: &Tensor<T>,
        _params: Option<ParamRef<'_, T>>,
        _mode: &mut Mode<'_>,
    ) -> Result<(Tensor<T>, Context<T>)> {
        let (out, arg) = kernels::maxpool2x2_forward(input)?;
        Ok((out, Context::Argmax(arg)))
    }

    fn backward(
        &self,
        ctx: &Context<T>,
        _params: Option<ParamRef<'_, T>>,
        grad_out: &Tensor<T>,
        _request: GradRequest,
    ) -> Result<LayerGrads<T>> {
        let Context::Argmax(arg) = ctx else {
            return Err(Error::MissingContext("maxpool2x2"));
        };
        Ok(LayerGrads {
            input: Some(kernels::maxpool2x2_backward(arg, grad_out)?),
            ..Default::default()
        })
    }
}

#[derive(Debug)]
pub struct Pointwise(pub Activation);

impl<T: Scalar> Layer<T> for Pointwise {
    fn kind(&self) -> &'static str {
        match self.0 {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        }
    }

    fn output_shape(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        Ok(input)
    }

    fn forward(
        &self,
        input: &Tensor<T>,
        _params: Option<ParamRef<'_, T>>,
        _mode: &mut Mode<'_>,
    ) -> Result<(Tensor<T>, Context<T>)> {
        let out = kernels::pointwise_activation(input, self.0)?;
        Ok((out.clone(), Context::Output(out)))
    }

    fn backward(
        &self,
        ctx: &Context<T>,
        _params: Option<ParamRef<'_, T>>,
        grad_out: &Tensor<T>,
        _request: GradRequest,
    ) -> Result<LayerGrads<T>> {
        let Context::Output(out) = ctx else {
            return Err(Error::MissingContext("activation"));
        };
        Ok(LayerGrads {
            input: Some(kernels::activation_backward(out, grad_out, self.0)?),
            ..Default::default()
        })
    }
}

#[derive(Debug)]
pub struct Dropout {
    pub rate: f64,
}

impl<T: Scalar> Layer<T> for Dropout {
    fn kind(&self) -> &'static str {
        "dropout"
    }

    fn output_shape(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        Ok(input)
    }

    fn forward(
        &self,
        input: &Tensor<T>,
        _params: Option<ParamRef<'_, T>>,
        mode: &mut Mode<'_>,
    ) -> Result<(Tensor<T>, Context<T>)> {
        let (out, mask) = match mode {
            Mode::Training(rng) => kernels::dropout(input, self.rate, true, &mut **rng)?,
            Mode::Inference => kernels::dropout(input, self.rate, false, &mut rand::rngs::mock::StepRng::new(0, 0))?,
        };
        Ok((out, Context::Dropout(mask)))
    }

    fn backward(
        &self,
        ctx: &Context<T>,
        _params: Option<ParamRef<'_, T>>,
        grad_out: &Tensor<T>,
        _request: GradRequest,
    ) -> Result<LayerGrads<T>> {
        let Context::Dropout(mask) = ctx else {
            return Err(Error::MissingContext("dropout"));
        };
        Ok(LayerGrads {
            input: Some(kernels::dropout_backward(mask.as_ref(), grad_out)?),
            ..Default::default()
        })
    }
}

#[derive(Debug)]
pub struct UpsampleNearest {
    pub factor: usize,
}

impl<T: Scalar> Layer<T> for UpsampleNearest {
    fn kind(&self) -> &'static str {
        "upsample_nearest"
    }

    fn output_shape(&self, [c, h, w]: [usize; 3]) -> Result<[usize; 3]> {
        Ok([c, h * self.factor, w * self.factor])
    }

    fn forward(
        &self,
        input: &Tensor<T>,
        _params: Option<ParamRef<'_, T>>,
        _mode: &mut Mode<'_>,
    ) -> Result<(Tensor<T>, Context<T>)> {
        Ok((kernels::upsample_nearest(input, self.factor)?, Context::Empty))
    }

    fn backward(
        &self,
        _ctx: &Context<T>,
        _params: Option<ParamRef<'_, T>>,
        grad_out: &Tensor<T>,
        _request: GradRequest,
    ) -> Result<LayerGrads<T>> {
        Ok(LayerGrads {
            input: Some(kernels::upsample_nearest_backward(grad_out, self.factor)?),
            ..Default::default()
        })
    }
}

/// Construction arguments for a layer kind.
#[derive(Clone, Copy, Debug, Default)]
pub struct LayerArgs {
    pub spec: Option<ConvSpec>,
    pub rate: Option<f64>,
    pub factor: Option<usize>,
}

pub type LayerFactory<T> = fn(&LayerArgs) -> Result<Box<dyn Layer<T>>>;

fn spec_arg(kind: &str, args: &LayerArgs) -> Result<ConvSpec> {
    let spec = args
        .spec
        .ok_or_else(|| Error::InvalidArgument(format!("{kind} requires a ConvSpec")))?;
    spec.validate()?;
    Ok(spec)
}

/// Registry of every built-in layer kind.
pub fn layer_registry<T: Scalar>() -> Registry<LayerFactory<T>> {
    let mut r: Registry<LayerFactory<T>> = Registry::new("layer kind");
    r.register("conv2d", |a| Ok(Box::new(Conv2d { spec: spec_arg("conv2d", a)? })))
        .register("tconv2d", |a| Ok(Box::new(TConv2d { spec: spec_arg("tconv2d", a)? })))
        .register("maxpool2x2", |_| Ok(Box::new(MaxPool2x2)))
        .register("relu", |_| Ok(Box::new(Pointwise(Activation::Relu))))
        .register("sigmoid", |_| Ok(Box::new(Pointwise(Activation::Sigmoid))))
        .register("dropout", |a| {
            let rate = a.rate.unwrap_or(0.5);
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
            }
            Ok(Box::new(Dropout { rate }))
        })
        .register("upsample_nearest", |a| {
            let factor = a.factor.unwrap_or(2);
            if factor < 1 {
                return Err(Error::InvalidArgument("upsample factor must be >= 1".into()));
            }
            Ok(Box::new(UpsampleNearest { factor }))
        });
    r
}
