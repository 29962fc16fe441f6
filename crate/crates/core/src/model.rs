//! The triplet-encoder / transposed-convolution-decoder segmentation network.
//!
//! One encoder parameter set is applied to all three pyramid scales. The
//! coarser embeddings are upsampled to the finest embedding's resolution and
//! stacked along depth before the decoder maps them back to a per-pixel
//! foreground probability.

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::kernels::{concat_depth, split_depth};
use crate::layers::{layer_registry, Context, GradRequest, Layer, LayerArgs, Mode, ParamRef, SeededRng};
use crate::pyramid::{build_pyramid, PyramidTriple};
use crate::tensor::{ConvSpec, Scalar, Tensor};

/// L2 strength applied to the first transposed convolution of blocks 5-8.
pub const DECODER_L2: f32 = 5e-4;
pub const DROPOUT_RATE: f64 = 0.5;
/// Channel depth of one encoder embedding.
pub const EMBEDDING_DEPTH: usize = 512;

/// Static description of one parameterized layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerDef {
    pub name: &'static str,
    pub transposed: bool,
    pub spec: ConvSpec,
    pub frozen: bool,
    pub l2: bool,
}

impl LayerDef {
    pub fn weight_shape(&self) -> [usize; 4] {
        let s = &self.spec;
        if self.transposed {
            [s.in_channels, s.out_channels, s.kernel_h, s.kernel_w]
        } else {
            [s.out_channels, s.in_channels, s.kernel_h, s.kernel_w]
        }
    }

    pub fn l2_strength(&self) -> f32 {
        if self.l2 {
            DECODER_L2
        } else {
            0.0
        }
    }

    pub fn is_encoder(&self) -> bool {
        self.name.starts_with("enc.")
    }
}

const fn conv(name: &'static str, cin: usize, cout: usize, frozen: bool) -> LayerDef {
    LayerDef {
        name,
        transposed: false,
        spec: ConvSpec {
            in_channels: cin,
            out_channels: cout,
            kernel_h: 3,
            kernel_w: 3,
            stride: 1,
            pad_h: 1,
            pad_w: 1,
            output_pad: 0,
        },
        frozen,
        l2: false,
    }
}

const fn tconv(name: &'static str, cin: usize, cout: usize, kernel: usize, stride: usize, l2: bool) -> LayerDef {
    LayerDef {
        name,
        transposed: true,
        spec: ConvSpec {
            in_channels: cin,
            out_channels: cout,
            kernel_h: kernel,
            kernel_w: kernel,
            stride,
            pad_h: (kernel - 1) / 2,
            pad_w: (kernel - 1) / 2,
            output_pad: stride - 1,
        },
        frozen: false,
        l2,
    }
}

/// Every parameterized layer in forward order.
pub const ARCHITECTURE: [LayerDef; 21] = [
    conv("enc.b1.c1", 3, 64, true),
    conv("enc.b1.c2", 64, 64, true),
    conv("enc.b2.c1", 64, 128, true),
    conv("enc.b2.c2", 128, 128, true),
    conv("enc.b3.c1", 128, 256, true),
    conv("enc.b3.c2", 256, 256, true),
    conv("enc.b3.c3", 256, 256, true),
    conv("enc.b4.c1", 256, 512, false),
    conv("enc.b4.c2", 512, 512, false),
    conv("enc.b4.c3", 512, 512, false),
    tconv("dec.b5.t1x1a", 1536, 64, 1, 1, true),
    tconv("dec.b5.t3x3", 64, 64, 3, 1, false),
    tconv("dec.b5.t1x1b", 64, 512, 1, 1, false),
    tconv("dec.b6.t1x1a", 512, 64, 1, 1, true),
    tconv("dec.b6.t5x5", 64, 64, 5, 2, false),
    tconv("dec.b6.t1x1b", 64, 256, 1, 1, false),
    tconv("dec.b7.t1x1a", 256, 64, 1, 1, true),
    tconv("dec.b7.t3x3", 64, 64, 3, 1, false),
    tconv("dec.b7.t1x1b", 64, 128, 1, 1, false),
    tconv("dec.b8.t5x5", 128, 64, 5, 2, true),
    tconv("dec.b9.t1x1", 64, 1, 1, 1, false),
];

pub const ENCODER_LAYERS: usize = 10;

/// Learnable tensors of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T = f32> {
    pub name: String,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
    pub trainable: bool,
    pub l2: f32,
}

impl<T: Scalar> LayerParams<T> {
    pub fn count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn as_ref(&self) -> ParamRef<'_, T> {
        ParamRef {
            weights: &self.weights,
            bias: &self.bias,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamCounts {
    pub total: usize,
    pub trainable: usize,
    pub frozen: usize,
}

/// All learnable layers of the network, in [`ARCHITECTURE`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T = f32> {
    pub layers: Vec<LayerParams<T>>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn get(&self, name: &str) -> Option<&LayerParams<T>> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn counts(&self) -> ParamCounts {
        let total = self.layers.iter().map(LayerParams::count).sum();
        let trainable = self.layers.iter().filter(|l| l.trainable).map(LayerParams::count).sum();
        ParamCounts {
            total,
            trainable,
            frozen: total - trainable,
        }
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    name: l.name.clone(),
                    weights: l.weights.cast(),
                    bias: l.bias.cast(),
                    trainable: l.trainable,
                    l2: l.l2,
                })
                .collect(),
        }
    }

    /// Checks names, order and shapes against [`ARCHITECTURE`].
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != ARCHITECTURE.len() {
            return Err(Error::Container(format!(
                "expected {} layers, found {}",
                ARCHITECTURE.len(),
                self.layers.len()
            )));
        }
        for (def, layer) in ARCHITECTURE.iter().zip(&self.layers) {
            if layer.name != def.name {
                return Err(Error::Layer {
                    layer: def.name.into(),
                    detail: format!("found `{}` in its position", layer.name),
                });
            }
            check_layer_shapes(def, &layer.weights, &layer.bias)?;
        }
        Ok(())
    }
}

fn check_layer_shapes<T: Scalar>(def: &LayerDef, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<()> {
    if weights.shape() != def.weight_shape() {
        return Err(Error::Layer {
            layer: def.name.into(),
            detail: format!(
                "weight shape {:?}, expected {:?}",
                weights.shape(),
                def.weight_shape()
            ),
        });
    }
    if bias.shape() != [def.spec.out_channels] {
        return Err(Error::Layer {
            layer: def.name.into(),
            detail: format!("bias shape {:?}, expected [{}]", bias.shape(), def.spec.out_channels),
        });
    }
    Ok(())
}

fn uniform<T: Scalar>(shape: [usize; 4], bound: f64, rng: &mut SeededRng) -> Tensor<T> {
    Tensor::from_fn(shape.to_vec(), |_| T::from_f64_lossy(rng.gen_range(-bound..bound)))
}

fn fans(def: &LayerDef) -> (f64, f64) {
    let k = (def.spec.kernel_h * def.spec.kernel_w) as f64;
    (k * def.spec.in_channels as f64, k * def.spec.out_channels as f64)
}

/// Named tensors supplying initial encoder weights (see `weights` module).
pub trait EncoderSource<T: Scalar> {
    /// Returns `(weights, bias)` for the layer, or `None` if absent.
    fn encoder_layer(&self, name: &str) -> Option<(Tensor<T>, Tensor<T>)>;
}

impl<T: Scalar> EncoderSource<T> for ModelParams<T> {
    fn encoder_layer(&self, name: &str) -> Option<(Tensor<T>, Tensor<T>)> {
        self.get(name).map(|l| (l.weights.clone(), l.bias.clone()))
    }
}

/// Creates the network's parameters.
///
/// Encoder layers come from `encoder` when given, otherwise they are drawn
/// He-uniform. Decoder layers are always drawn Glorot-uniform
/// (`±sqrt(6 / (fan_in + fan_out))`) from a stream that depends only on
/// `seed`. Biases start at zero and blocks 1-3 are frozen.
pub fn build_model<T: Scalar>(encoder: Option<&dyn EncoderSource<T>>, seed: u64) -> Result<ModelParams<T>> {
    let mut enc_rng = SeededRng::seed_from_u64(seed);
    let mut dec_rng = SeededRng::seed_from_u64(seed);
    dec_rng.set_stream(1);
    let mut layers = Vec::with_capacity(ARCHITECTURE.len());
    for def in &ARCHITECTURE {
        let (fan_in, fan_out) = fans(def);
        let (weights, bias) = match (def.is_encoder(), encoder) {
            (true, Some(src)) => {
                let (w, b) = src.encoder_layer(def.name).ok_or_else(|| Error::Layer {
                    layer: def.name.into(),
                    detail: "missing from encoder weight container".into(),
                })?;
                check_layer_shapes(def, &w, &b)?;
                (w, b)
            }
            (true, None) => (
                uniform(def.weight_shape(), (6.0 / fan_in).sqrt(), &mut enc_rng),
                Tensor::zeros(vec![def.spec.out_channels]),
            ),
            (false, _) => (
                uniform(def.weight_shape(), (6.0 / (fan_in + fan_out)).sqrt(), &mut dec_rng),
                Tensor::zeros(vec![def.spec.out_channels]),
            ),
        };
        layers.push(LayerParams {
            name: def.name.to_string(),
            weights,
            bias,
            trainable: !def.frozen,
            l2: def.l2_strength(),
        });
    }
    Ok(ModelParams { layers })
}

#[derive(Debug)]
struct Node<T: Scalar> {
    layer: Box<dyn Layer<T>>,
    param: Option<usize>,
}

/// Per-layer gradient pairs `(weights, bias)`; `None` for frozen layers.
#[derive(Clone, Debug)]
pub struct ParamGrads<T> {
    pub layers: Vec<Option<(Tensor<T>, Tensor<T>)>>,
}

impl<T: Scalar> ParamGrads<T> {
    fn empty(n: usize) -> Self {
        Self {
            layers: (0..n).map(|_| None).collect(),
        }
    }

    fn accumulate(&mut self, idx: usize, w: Tensor<T>, b: Tensor<T>) -> Result<()> {
        match &mut self.layers[idx] {
            Some((gw, gb)) => {
                gw.axpy(T::one(), &w)?;
                gb.axpy(T::one(), &b)?;
            }
            slot @ None => *slot = Some((w, b)),
        }
        Ok(())
    }
}

/// Everything produced by one forward pass that backward needs.
#[derive(Debug)]
pub struct ForwardPass<T: Scalar> {
    pub probs: Tensor<T>,
    pub logits: Tensor<T>,
    /// Shape of the fused (concatenated) embedding.
    pub fused_shape: [usize; 3],
    scale_traces: [Vec<Context<T>>; 3],
    decoder_trace: Vec<Context<T>>,
    head_trace: Context<T>,
}

impl<T: Scalar> ForwardPass<T> {
    /// Which rectified units were active. Passes with equal patterns lie in
    /// the same linear region of the network.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.scale_traces
            .iter()
            .flatten()
            .chain(&self.decoder_trace)
            .filter_map(|ctx| match ctx {
                Context::Output(out) => Some(out.data().iter().map(|&v| v > T::zero())),
                _ => None,
            })
            .flatten()
            .collect()
    }
}

/// Network parameters together with the layer graph that uses them.
#[derive(Debug)]
pub struct Network<T: Scalar = f32> {
    params: ModelParams<T>,
    encoder: Vec<Node<T>>,
    decoder: Vec<Node<T>>,
    head: Box<dyn Layer<T>>,
    upsample: [Box<dyn Layer<T>>; 2],
}

enum Step {
    Param(usize),
    Op(&'static str),
}

impl<T: Scalar> Network<T> {
    pub fn new(params: ModelParams<T>) -> Result<Self> {
        params.validate()?;
        let registry = layer_registry::<T>();
        let make = |kind: &str, args: LayerArgs| -> Result<Box<dyn Layer<T>>> { (registry.get(kind)?)(&args) };
        let build = |steps: &[Step]| -> Result<Vec<Node<T>>> {
            steps
                .iter()
                .map(|s| match *s {
                    Step::Param(i) => {
                        let def = &ARCHITECTURE[i];
                        let kind = if def.transposed { "tconv2d" } else { "conv2d" };
                        Ok(Node {
                            layer: make(kind, LayerArgs { spec: Some(def.spec), ..Default::default() })?,
                            param: Some(i),
                        })
                    }
                    Step::Op(kind) => Ok(Node {
                        layer: make(kind, LayerArgs { rate: Some(DROPOUT_RATE), ..Default::default() })?,
                        param: None,
                    }),
                })
                .collect()
        };

        use Step::{Op, Param};
        #[rustfmt::skip]
        let encoder = build(&[
            Param(0), Op("relu"), Param(1), Op("relu"), Op("maxpool2x2"),
            Param(2), Op("relu"), Param(3), Op("relu"), Op("maxpool2x2"),
            Param(4), Op("relu"), Param(5), Op("relu"), Param(6), Op("relu"),
            Param(7), Op("relu"), Op("dropout"),
            Param(8), Op("relu"), Op("dropout"),
            Param(9), Op("relu"), Op("dropout"),
        ])?;
        let mut dec_steps = Vec::new();
        for i in ENCODER_LAYERS..ARCHITECTURE.len() {
            dec_steps.push(Param(i));
            if i + 1 < ARCHITECTURE.len() {
                dec_steps.push(Op("relu"));
            }
        }
        let decoder = build(&dec_steps)?;
        let upsample = [
            make("upsample_nearest", LayerArgs { factor: Some(2), ..Default::default() })?,
            make("upsample_nearest", LayerArgs { factor: Some(4), ..Default::default() })?,
        ];
        Ok(Self {
            params,
            encoder,
            decoder,
            head: make("sigmoid", LayerArgs::default())?,
            upsample,
        })
    }

    pub fn build(encoder: Option<&dyn EncoderSource<T>>, seed: u64) -> Result<Self> {
        Self::new(build_model(encoder, seed)?)
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams<T> {
        &mut self.params
    }

    pub fn into_params(self) -> ModelParams<T> {
        self.params
    }

    fn param_ref(&self, node: &Node<T>) -> Option<ParamRef<'_, T>> {
        node.param.map(|i| self.params.layers[i].as_ref())
    }

    fn trainable(&self, node: &Node<T>) -> bool {
        node.param.is_some_and(|i| self.params.layers[i].trainable)
    }

    /// Number of leading encoder nodes that are deterministic and frozen, so
    /// their output for a given image never changes during training.
    pub fn frozen_prefix_len(&self) -> usize {
        self.encoder
            .iter()
            .position(|n| self.trainable(n) || n.layer.kind() == "dropout")
            .unwrap_or(self.encoder.len())
    }

    /// Runs the frozen encoder prefix on one scale.
    pub fn encode_prefix(&self, image: &Tensor<T>) -> Result<Tensor<T>> {
        let mut x = image.clone();
        for node in &self.encoder[..self.frozen_prefix_len()] {
            x = node.layer.forward(&x, self.param_ref(node), &mut Mode::Inference)?.0;
        }
        Ok(x)
    }

    fn encode_suffix(&self, prefix_out: &Tensor<T>, mode: &mut Mode<'_>) -> Result<(Tensor<T>, Vec<Context<T>>)> {
        let start = self.frozen_prefix_len();
        let mut x = prefix_out.clone();
        let mut trace = Vec::with_capacity(self.encoder.len() - start);
        for node in &self.encoder[start..] {
            let (y, ctx) = node.layer.forward(&x, self.param_ref(node), mode)?;
            trace.push(ctx);
            x = y;
        }
        Ok((x, trace))
    }

    /// Encodes one `(3, h, w)` image into a `(512, h/4, w/4)` embedding.
    pub fn encode_scale(&self, image: &Tensor<T>, mode: &mut Mode<'_>) -> Result<Tensor<T>> {
        let (c, h, w) = image.chw()?;
        if c != 3 || h % 4 != 0 || w % 4 != 0 {
            return Err(Error::dim(
                "encode_scale",
                format!("expected (3, h, w) with h, w multiples of 4, got {:?}", image.shape()),
            ));
        }
        Ok(self.encode_suffix(&self.encode_prefix(image)?, mode)?.0)
    }

    /// Full forward pass over a pyramid. Returns probabilities of shape
    /// `(1, H, W)` along with the cached state for [`Self::backward`].
    pub fn forward(&self, pyramid: &PyramidTriple<T>, mode: &mut Mode<'_>) -> Result<ForwardPass<T>> {
        let (_, h, w) = pyramid.full().chw()?;
        if h % 4 != 0 || w % 4 != 0 {
            return Err(Error::dim("forward", format!("extent {h}x{w} is not a multiple of 4")));
        }
        let prefixes = [
            self.encode_prefix(pyramid.full())?,
            self.encode_prefix(pyramid.half())?,
            self.encode_prefix(pyramid.quarter())?,
        ];
        self.forward_from_prefixes([&prefixes[0], &prefixes[1], &prefixes[2]], mode)
    }

    /// Forward pass starting from precomputed frozen-prefix outputs of the
    /// three scales (see [`Self::encode_prefix`]).
    pub fn forward_from_prefixes(&self, prefixes: [&Tensor<T>; 3], mode: &mut Mode<'_>) -> Result<ForwardPass<T>> {
        let (f1, t1) = self.encode_suffix(prefixes[0], mode)?;
        let (f2, t2) = self.encode_suffix(prefixes[1], mode)?;
        let (f3, t3) = self.encode_suffix(prefixes[2], mode)?;
        let f2 = self.upsample[0].forward(&f2, None, mode)?.0;
        let f3 = self.upsample[1].forward(&f3, None, mode)?.0;
        let fused = concat_depth(&[&f1, &f2, &f3])?;
        let (fc, fh, fw) = fused.chw()?;

        let mut x = fused;
        let mut decoder_trace = Vec::with_capacity(self.decoder.len());
        for node in &self.decoder {
            let (y, ctx) = node.layer.forward(&x, self.param_ref(node), mode)?;
            decoder_trace.push(ctx);
            x = y;
        }
        let (probs, head_trace) = self.head.forward(&x, None, mode)?;
        Ok(ForwardPass {
            probs,
            logits: x,
            fused_shape: [fc, fh, fw],
            scale_traces: [t1, t2, t3],
            decoder_trace,
            head_trace,
        })
    }

    /// Probability map for a raw `(3, H, W)` frame in inference mode.
    pub fn predict(&self, frame: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(&build_pyramid(frame)?, &mut Mode::Inference)?.probs)
    }

    /// Backpropagates a gradient with respect to the output probabilities.
    pub fn backward_from_probs(&self, pass: &ForwardPass<T>, grad_probs: &Tensor<T>) -> Result<ParamGrads<T>> {
        let g = self.head.backward(&pass.head_trace, None, grad_probs, GradRequest::ALL)?;
        self.backward(pass, &g.input.ok_or(Error::MissingContext("sigmoid"))?)
    }

    /// Backpropagates a gradient with respect to the pre-sigmoid logits.
    pub fn backward(&self, pass: &ForwardPass<T>, grad_logits: &Tensor<T>) -> Result<ParamGrads<T>> {
        let mut grads = ParamGrads::empty(self.params.layers.len());
        let mut g = grad_logits.clone();
        for (node, ctx) in self.decoder.iter().zip(&pass.decoder_trace).rev() {
            let request = GradRequest {
                input: true,
                params: self.trainable(node),
            };
            let lg = node.layer.backward(ctx, self.param_ref(node), &g, request)?;
            if let (Some(i), Some(w), Some(b)) = (node.param, lg.weights, lg.bias) {
                grads.accumulate(i, w, b)?;
            }
            g = lg.input.ok_or(Error::MissingContext("decoder"))?;
        }

        let start = self.frozen_prefix_len();
        if !self.encoder[start..].iter().any(|n| self.trainable(n)) {
            return Ok(grads);
        }
        let parts = split_depth(&g, &[EMBEDDING_DEPTH; 3])?;
        let mut scale_grads = parts.into_iter();
        let g1 = scale_grads.next().expect("three parts");
        let g2 = self.upsample[0]
            .backward(&Context::Empty, None, &scale_grads.next().expect("three parts"), GradRequest::ALL)?
            .input
            .expect("upsample input grad");
        let g3 = self.upsample[1]
            .backward(&Context::Empty, None, &scale_grads.next().expect("three parts"), GradRequest::ALL)?
            .input
            .expect("upsample input grad");

        for (mut g, trace) in [g1, g2, g3].into_iter().zip(&pass.scale_traces) {
            for (offset, (node, ctx)) in self.encoder[start..].iter().zip(trace).enumerate().rev() {
                let request = GradRequest {
                    input: offset > 0,
                    params: self.trainable(node),
                };
                let lg = node.layer.backward(ctx, self.param_ref(node), &g, request)?;
                if let (Some(i), Some(w), Some(b)) = (node.param, lg.weights, lg.bias) {
                    grads.accumulate(i, w, b)?;
                }
                match lg.input {
                    Some(gi) => g = gi,
                    None => break,
                }
            }
        }
        Ok(grads)
    }

    /// One row per parameterized layer: `(name, kind, weight shape, params,
    /// trainable, l2)`.
    pub fn layer_table(&self) -> Vec<LayerRow> {
        ARCHITECTURE
            .iter()
            .zip(&self.params.layers)
            .map(|(def, p)| LayerRow {
                name: def.name,
                kind: if def.transposed { "tconv2d" } else { "conv2d" },
                kernel: def.spec.kernel_h,
                stride: def.spec.stride,
                in_channels: def.spec.in_channels,
                out_channels: def.spec.out_channels,
                params: p.count(),
                trainable: p.trainable,
                l2: p.l2,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerRow {
    pub name: &'static str,
    pub kind: &'static str,
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub params: usize,
    pub trainable: bool,
    pub l2: f32,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_from_layer_shapes() {
        // sum over layers of (k*k*in + 1) * out, computed from the table only
        let mut total = 0;
        let mut frozen = 0;
        for def in &ARCHITECTURE {
            let s = &def.spec;
            let n = (s.kernel_h * s.kernel_w * s.in_channels + 1) * s.out_channels;
            total += n;
            if def.frozen {
                frozen += n;
            }
        }
        assert_eq!((total, total - frozen, frozen), (8_222_401, 6_486_913, 1_735_488));
        let params = build_model::<f32>(None, 0).unwrap();
        assert_eq!(
            params.counts(),
            ParamCounts {
                total: 8_222_401,
                trainable: 6_486_913,
                frozen: 1_735_488
            }
        );
    }

    #[test]
    fn first_layer_shape_and_flags() {
        let p = build_model::<f32>(None, 1).unwrap();
        assert_eq!(p.get("enc.b1.c1").unwrap().weights.shape(), &[64, 3, 3, 3]);
        assert_eq!(p.get("dec.b6.t5x5").unwrap().weights.shape(), &[64, 64, 5, 5]);
        for l in &p.layers {
            let frozen = l.name.starts_with("enc.b1") || l.name.starts_with("enc.b2") || l.name.starts_with("enc.b3");
            assert_eq!(l.trainable, !frozen, "{}", l.name);
            assert!(l.bias.data().iter().all(|&b| b == 0.0));
        }
        let l2: Vec<_> = p.layers.iter().filter(|l| l.l2 > 0.0).map(|l| l.name.as_str()).collect();
        assert_eq!(l2, ["dec.b5.t1x1a", "dec.b6.t1x1a", "dec.b7.t1x1a", "dec.b8.t5x5"]);
    }

    #[test]
    fn decoder_init_is_seeded_and_independent_of_encoder_source() {
        let a = build_model::<f32>(None, 9).unwrap();
        let b = build_model::<f32>(None, 9).unwrap();
        assert_eq!(a, b);
        let other = build_model::<f32>(None, 10).unwrap();
        let loaded = build_model::<f32>(Some(&other), 9).unwrap();
        for (x, y) in a.layers.iter().zip(&loaded.layers).skip(ENCODER_LAYERS) {
            assert_eq!(x, y);
        }
        for (x, y) in other.layers.iter().zip(&loaded.layers).take(ENCODER_LAYERS) {
            assert_eq!(x.weights, y.weights);
        }
        let bound = (6.0f64 / (1536.0 + 64.0)).sqrt() as f32;
        assert!(a.get("dec.b5.t1x1a").unwrap().weights.data().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn encoder_source_shape_mismatch_names_layer() {
        let mut src = build_model::<f32>(None, 0).unwrap();
        src.layers[3].weights = Tensor::zeros(vec![1, 1, 1, 1]);
        let err = build_model::<f32>(Some(&src), 0).unwrap_err();
        assert!(err.to_string().contains("enc.b2.c2"), "{err}");
    }

    #[test]
    fn frozen_prefix_ends_before_block_four() {
        let net = Network::<f32>::build(None, 0).unwrap();
        // b1: 5 nodes, b2: 5 nodes, b3: 6 nodes
        assert_eq!(net.frozen_prefix_len(), 16);
        assert_eq!(net.layer_table().len(), 21);
    }

    #[test]
    fn encode_scale_shape() {
        let net = Network::<f32>::build(None, 0).unwrap();
        let img = Tensor::from_fn(vec![3, 16, 24], |i| (i % 255) as f32);
        let f = net.encode_scale(&img, &mut Mode::Inference).unwrap();
        assert_eq!(f.shape(), &[512, 4, 6]);
        let again = net.encode_scale(&img, &mut Mode::Inference).unwrap();
        assert_eq!(f, again);
        assert!(net.encode_scale(&Tensor::zeros(vec![3, 6, 8]), &mut Mode::Inference).is_err());
    }
}
