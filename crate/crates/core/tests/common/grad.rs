//! Shared finite-difference gradient checks (f64).

use fgseg::data::labels::LabelMask;
use fgseg::layers::{layer_registry, GradRequest, LayerArgs, Mode, ParamRef, SeededRng};
use fgseg::model::Network;
use fgseg::pyramid::build_pyramid;
use fgseg::training::weighted_bce_logits;
use fgseg::{ConvSpec, Tensor};
use rand::{Rng, SeedableRng};

pub const H: f64 = 1e-3;
pub const LAYER_TOL: f64 = 1e-4;
pub const END_TO_END_TOL: f64 = 1e-3;

pub fn rel_err(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < 1e-10 {
        0.0
    } else {
        (a - n).abs() / scale
    }
}

pub fn random(shape: &[usize], rng: &mut SeededRng) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| rng.gen_range(-1.0..1.0))
}

/// Values at least `0.2` away from zero, so ReLU kinks are out of reach.
pub fn away_from_zero(shape: &[usize], rng: &mut SeededRng) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| {
        let v: f64 = rng.gen_range(0.2..1.0);
        if rng.gen() { v } else { -v }
    })
}

/// Distinct values spaced well beyond `2 H`, so max-pool winners are stable.
pub fn spaced(shape: &[usize], rng: &mut SeededRng) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let mut v: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
    for i in (1..n).rev() {
        v.swap(i, rng.gen_range(0..=i));
    }
    Tensor::new(shape.to_vec(), v).unwrap()
}

pub struct Case {
    pub kind: &'static str,
    pub args: LayerArgs,
    pub input: Tensor<f64>,
    pub params: Option<(Tensor<f64>, Tensor<f64>)>,
}

/// Scalar objective `sum(r * layer(x))` with a fixed random `r`; dropout
/// re-seeds for every evaluation so the mask is identical.
pub fn layer_error(case: Case, seed: u64) -> f64 {
    let layer = (layer_registry::<f64>().get(case.kind).unwrap())(&case.args).unwrap();
    let run = |x: &Tensor<f64>, p: &Option<(Tensor<f64>, Tensor<f64>)>| {
        let mut drng = SeededRng::seed_from_u64(seed);
        let pref = p.as_ref().map(|(w, b)| ParamRef { weights: w, bias: b });
        layer.forward(x, pref, &mut Mode::Training(&mut drng)).unwrap()
    };
    let (out, ctx) = run(&case.input, &case.params);
    let mut rng = SeededRng::seed_from_u64(seed ^ 0xabc);
    let r = random(out.shape(), &mut rng);
    let objective = |x: &Tensor<f64>, p: &Option<(Tensor<f64>, Tensor<f64>)>| run(x, p).0.dot(&r);
    let pref = case.params.as_ref().map(|(w, b)| ParamRef { weights: w, bias: b });
    let grads = layer.backward(&ctx, pref, &r, GradRequest::ALL).unwrap();

    let mut worst = 0.0f64;
    let gi = grads.input.expect("input gradient");
    for i in 0..case.input.len() {
        let mut up = case.input.clone();
        let mut dn = case.input.clone();
        up.data_mut()[i] += H;
        dn.data_mut()[i] -= H;
        let fd = (objective(&up, &case.params) - objective(&dn, &case.params)) / (2.0 * H);
        worst = worst.max(rel_err(gi.data()[i], fd));
    }
    if let Some((w, b)) = &case.params {
        let (gw, gb) = (grads.weights.expect("weight gradient"), grads.bias.expect("bias gradient"));
        for (which, t, g) in [(0, w, &gw), (1, b, &gb)] {
            for i in 0..t.len() {
                let bump = |d: f64| {
                    let mut p = case.params.clone().unwrap();
                    let target = if which == 0 { &mut p.0 } else { &mut p.1 };
                    target.data_mut()[i] += d;
                    objective(&case.input, &Some(p))
                };
                let fd = (bump(H) - bump(-H)) / (2.0 * H);
                worst = worst.max(rel_err(g.data()[i], fd));
            }
        }
    }
    worst
}

pub fn conv_case(kind: &'static str, spec: ConvSpec, h: usize, w: usize, rng: &mut SeededRng) -> Case {
    let wshape = if kind == "tconv2d" {
        vec![spec.in_channels, spec.out_channels, spec.kernel_h, spec.kernel_w]
    } else {
        vec![spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w]
    };
    Case {
        kind,
        args: LayerArgs { spec: Some(spec), ..Default::default() },
        input: random(&[spec.in_channels, h, w], rng),
        params: Some((random(&wshape, rng), random(&[spec.out_channels], rng))),
    }
}


/// Worst relative error per layer primitive.
pub fn all_layer_errors() -> Vec<(&'static str, f64)> {
    let mut rng = SeededRng::seed_from_u64(1);
    let none = LayerArgs::default();
    let cases = vec![
        conv_case("conv2d", ConvSpec::same(2, 3, 3), 5, 4, &mut rng),
        conv_case("conv2d", ConvSpec::same(3, 2, 1), 4, 4, &mut rng),
        conv_case("tconv2d", ConvSpec::same(2, 3, 3), 4, 5, &mut rng),
        conv_case("tconv2d", ConvSpec::same(3, 2, 1), 3, 3, &mut rng),
        conv_case("tconv2d", ConvSpec::upscale2(2, 2, 5), 3, 4, &mut rng),
        Case { kind: "relu", args: none, input: away_from_zero(&[2, 4, 3], &mut rng), params: None },
        Case { kind: "sigmoid", args: none, input: random(&[2, 3, 3], &mut rng), params: None },
        Case { kind: "maxpool2x2", args: none, input: spaced(&[2, 4, 6], &mut rng), params: None },
        Case { kind: "dropout", args: LayerArgs { rate: Some(0.5), ..none }, input: random(&[3, 4, 4], &mut rng), params: None },
        Case {
            kind: "upsample_nearest",
            args: LayerArgs { factor: Some(2), ..none },
            input: random(&[2, 3, 2], &mut rng),
            params: None,
        },
    ];
    cases
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let kind = c.kind;
            (kind, layer_error(c, i as u64 + 1))
        })
        .collect()
}

pub struct EndToEnd {
    pub worst: f64,
    pub checked: usize,
    pub tries: usize,
}

/// Loss gradient of a `(3, 16, 16)` frame against central differences on 50
/// trainable weights. With `kink_free`, samples whose `±h` perturbation
/// changes any ReLU decision (where the loss is not differentiable) or whose
/// gradient is exactly zero are redrawn.
pub fn end_to_end(h: f64, kink_free: bool) -> EndToEnd {
    let mut net = Network::<f64>::build(None, 4).unwrap();
    let mut rng = SeededRng::seed_from_u64(5);
    let image = Tensor::<f64>::from_fn(vec![3, 16, 16], |_| rng.gen_range(0.0..255.0));
    let codes: Vec<u8> = (0..256)
        .map(|i| {
            let (y, x) = (i / 16, i % 16);
            match (x, y) {
                (5..=10, 4..=11) => 255,
                (4 | 11, _) | (_, 3 | 12) => 170,
                _ => 0,
            }
        })
        .collect();
    let labels = LabelMask::from_codes(16, 16, codes).unwrap();
    let (wf, wb) = fgseg::training::class_weights(&labels);
    let pyr = build_pyramid(&image).unwrap();

    // same dropout stream for every evaluation
    let run = |net: &Network<f64>| {
        let mut drng = SeededRng::seed_from_u64(99);
        let pass = net.forward(&pyr, &mut Mode::Training(&mut drng)).unwrap();
        let (loss, g) = weighted_bce_logits(&pass.probs, &labels, wf, wb).unwrap();
        (loss, pass, g)
    };
    let (_, pass, g) = run(&net);
    let grads = net.backward(&pass, &g).unwrap();
    let base_pattern = pass.relu_pattern();

    let trainable: Vec<usize> = (0..net.params().layers.len())
        .filter(|&i| net.params().layers[i].trainable)
        .collect();
    let mut result = EndToEnd { worst: 0.0, checked: 0, tries: 0 };
    while result.checked < 50 && result.tries < 5000 {
        result.tries += 1;
        let li = trainable[result.tries % trainable.len()];
        let wi = rng.gen_range(0..net.params().layers[li].weights.len());
        let analytic = grads.layers[li].as_ref().unwrap().0.data()[wi];
        if kink_free && analytic == 0.0 {
            continue;
        }
        let orig = net.params().layers[li].weights.data()[wi];
        net.params_mut().layers[li].weights.data_mut()[wi] = orig + h;
        let (up, up_pass, _) = run(&net);
        net.params_mut().layers[li].weights.data_mut()[wi] = orig - h;
        let (dn, dn_pass, _) = run(&net);
        net.params_mut().layers[li].weights.data_mut()[wi] = orig;
        if kink_free && (up_pass.relu_pattern() != base_pattern || dn_pass.relu_pattern() != base_pattern) {
            continue;
        }
        let fd = (up - dn) / (2.0 * h);
        result.worst = result.worst.max(rel_err(analytic, fd));
        result.checked += 1;
    }
    result
}
