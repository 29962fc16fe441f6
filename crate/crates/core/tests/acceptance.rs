//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use std::time::{Duration, Instant};

use common::grad::{all_layer_errors, end_to_end, END_TO_END_TOL, H, LAYER_TOL};
use common::metrics_oracle as oracle;
use fgseg::data::labels::LabelMask;
use fgseg::data::synth::{synth_sequence, SynthConfig};
use fgseg::layers::{Mode, SeededRng};
use fgseg::metrics::{accumulate, accumulate_probs, compute_metrics, threshold_grid, threshold_sweep, ConfusionCounts};
use fgseg::model::{build_model, Network, ModelParams};
use fgseg::pyramid::build_pyramid;
use fgseg::training::optim::{OptimizerState, PlateauConfig, RmsPropConfig};
use fgseg::training::{rmsprop_step, select_frames, train, weighted_bce, TrainConfig, TrainingExample};
use fgseg::weights::WeightContainer;
use fgseg::Tensor;
use rand::{Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn parameter_accounting() -> Outcome {
    let t = Instant::now();
    let c = build_model::<f32>(None, 0).unwrap().counts();
    let elapsed = t.elapsed();
    outcome(
        (c.total, c.trainable, c.frozen) == (8_222_401, 6_486_913, 1_735_488) && elapsed < Duration::from_secs(1),
        format!("total {} trainable {} frozen {} in {elapsed:.2?}", c.total, c.trainable, c.frozen),
    )
}

fn gradient_fidelity() -> Outcome {
    let t = Instant::now();
    let layers = all_layer_errors();
    let (worst_kind, worst_layer) = layers
        .iter()
        .fold(("", 0.0f64), |acc, &(k, e)| if e > acc.1 { (k, e) } else { acc });
    let e2e = end_to_end(H, true);
    let elapsed = t.elapsed();
    outcome(
        worst_layer < LAYER_TOL && e2e.checked == 50 && e2e.worst < END_TO_END_TOL && elapsed < Duration::from_secs(120),
        format!(
            "per-layer worst {worst_layer:.1e} ({worst_kind}), end-to-end worst {:.1e} over {} weights ({} draws, kinks skipped), h={H:e}, {elapsed:.1?}",
            e2e.worst, e2e.checked, e2e.tries
        ),
    )
}

fn metric_oracle() -> Outcome {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut counts_ok = true;
    for _ in 0..1000 {
        let codes: Vec<u8> = (0..256).map(|_| [0, 50, 85, 170, 255][rng.gen_range(0..5)]).collect();
        let pred: Vec<bool> = (0..256).map(|_| rng.gen_bool(0.45)).collect();
        let labels = LabelMask::from_codes(16, 16, codes).unwrap();
        let (tp, fp, fn_, tn) = oracle::count(&pred, &labels);
        let c = accumulate(&pred, &labels).unwrap();
        counts_ok &= c == ConfusionCounts::new(tp, fp, fn_, tn);
        let r = compute_metrics(c);
        let (tp, fp, fn_, tn) = (tp as f64, fp as f64, fn_ as f64, tn as f64);
        for (a, b) in [
            (r.precision, oracle::precision(tp, fp)),
            (r.recall, oracle::recall(tp, fn_)),
            (r.f_measure, oracle::f_measure(tp, fp, fn_)),
            (r.pwc, oracle::pwc(tp, fp, fn_, tn)),
            (r.mcc, oracle::mcc(tp, fp, fn_, tn)),
        ] {
            worst = worst.max((a - b).abs());
        }
    }
    let hand = compute_metrics(ConfusionCounts::new(2, 1, 1, 6));
    let hand_ok = (hand.f_measure - 2.0 / 3.0).abs() < 1e-12
        && (hand.pwc - 20.0).abs() < 1e-12
        && (hand.mcc - 11.0 / 21.0).abs() < 1e-12;
    outcome(
        counts_ok && worst < 1e-12 && hand_ok,
        format!(
            "1000 pairs, max deviation {worst:.1e}; hand case F {:.4} PWC {:.1} MCC {:.4}",
            hand.f_measure, hand.pwc, hand.mcc
        ),
    )
}

fn shape_contract() -> Outcome {
    let t = Instant::now();
    let net = Network::<f32>::build(None, 0).unwrap();
    let sizes = [16, 32, 64, 128, 240, 320];
    let mut rng = SeededRng::seed_from_u64(4);
    let mut failures = Vec::new();
    for &h in &sizes {
        for &w in &sizes {
            let img = Tensor::<f32>::from_fn(vec![3, h, w], |_| rng.gen_range(0.0..255.0));
            let pass = net.forward(&build_pyramid(&img).unwrap(), &mut Mode::Inference).unwrap();
            let ok = pass.probs.shape() == [1, h, w]
                && pass.probs.data().iter().all(|&p| p > 0.0 && p < 1.0)
                && pass.fused_shape == [1536, h / 4, w / 4];
            if !ok {
                failures.push(format!("{h}x{w}"));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("{} extents checked, failures {:?}, {:.1?}", sizes.len() * sizes.len(), failures, t.elapsed()),
    )
}

struct Learned {
    params: ModelParams<f32>,
    held_out: Vec<(Tensor<f32>, LabelMask)>,
}

fn learnability() -> (Outcome, Learned) {
    let seq = synth_sequence(&SynthConfig { n_frames: 100, seed: 7, ..SynthConfig::default() }).unwrap();
    let picked = select_frames(seq.len(), 50, 7, None).unwrap();
    let examples: Vec<TrainingExample<f32>> = picked
        .iter()
        .map(|&i| TrainingExample { frame: seq[i].0.to_tensor(), labels: seq[i].1.clone(), frame_index: i })
        .collect();
    let config = TrainConfig { seed: 7, ..TrainConfig::for_frames(50) };
    let t = Instant::now();
    let (params, history) = train(&config, &examples, build_model(None, 7).unwrap()).unwrap();
    let elapsed = t.elapsed();

    let held_out: Vec<(Tensor<f32>, LabelMask)> = (0..seq.len())
        .filter(|i| !picked.contains(i))
        .map(|i| (seq[i].0.to_tensor(), seq[i].1.clone()))
        .collect();
    let net = Network::new(params.clone()).unwrap();
    let counts: ConfusionCounts = held_out
        .iter()
        .map(|(f, l)| accumulate_probs(&net.predict(f).unwrap(), l, config.threshold).unwrap())
        .sum();
    let r = compute_metrics(counts);
    let out = outcome(
        r.f_measure >= 0.95 && r.mcc >= 0.95 && elapsed < Duration::from_secs(30 * 60) && history.epochs.len() == 60,
        format!(
            "64x64, 50 frames, {} epochs (checkpoint {}): held-out F {:.4} MCC {:.4} on {} frames at t=0.8, trained in {:.1?}",
            history.epochs.len(),
            history.checkpoint_epoch,
            r.f_measure,
            r.mcc,
            held_out.len(),
            elapsed
        ),
    );
    (out, Learned { params, held_out })
}

fn sweep_monotonicity(learned: &Learned) -> Outcome {
    let grid = threshold_grid(0.1);
    let monotone = |probs: &[Tensor<f32>], labels: &[LabelMask]| {
        let sweep = threshold_sweep(probs, labels, &grid).unwrap();
        let ok = sweep.rows.len() == 9
            && sweep.rows.windows(2).all(|w| {
                let (a, b) = (w[0].counts, w[1].counts);
                b.tp <= a.tp && b.fp <= a.fp && b.tn >= a.tn && b.fn_ >= a.fn_
            });
        (ok, sweep.best_threshold)
    };
    let mut rng = SeededRng::seed_from_u64(6);
    let random_probs: Vec<Tensor<f32>> = (0..20).map(|_| Tensor::from_fn(vec![1, 16, 16], |_| rng.gen())).collect();
    let random_labels: Vec<LabelMask> = (0..20)
        .map(|_| LabelMask::from_codes(16, 16, (0..256).map(|_| [0, 170, 255][rng.gen_range(0..3)]).collect()).unwrap())
        .collect();
    let (random_ok, _) = monotone(&random_probs, &random_labels);

    let net = Network::new(learned.params.clone()).unwrap();
    let probs: Vec<Tensor<f32>> = learned.held_out.iter().map(|(f, _)| net.predict(f).unwrap()).collect();
    let labels: Vec<LabelMask> = learned.held_out.iter().map(|(_, l)| l.clone()).collect();
    let (trained_ok, best) = monotone(&probs, &labels);
    outcome(
        random_ok && trained_ok,
        format!("random maps {random_ok}, trained model {trained_ok}; trained argmax-F threshold {best:.1}"),
    )
}

fn loss_semantics() -> Outcome {
    let mut rng = SeededRng::seed_from_u64(8);
    let mut worst_oracle = 0.0f64;
    let mut void_exact = true;
    for _ in 0..200 {
        let codes: Vec<u8> = (0..64)
            .map(|i| if i < 2 { [255, 170][i] } else { [0, 50, 85, 170, 255][rng.gen_range(0..5)] })
            .collect();
        let labels = LabelMask::from_codes(8, 8, codes.clone()).unwrap();
        let probs = Tensor::<f64>::from_fn(vec![1, 8, 8], |_| rng.gen_range(0.0..1.0));
        let (loss, grad) = weighted_bce(&probs, &labels, 1.0, 1.0).unwrap();

        // unweighted cross-entropy over non-void pixels
        let (mut sum, mut m) = (0.0, 0.0);
        for (i, &c) in codes.iter().enumerate() {
            let y = match c {
                255 => 1.0,
                0 | 50 => 0.0,
                _ => continue,
            };
            let p = probs.data()[i].clamp(1e-7, 1.0 - 1e-7);
            sum += y * p.ln() + (1.0 - y) * (1.0 - p).ln();
            m += 1.0;
        }
        worst_oracle = worst_oracle.max((loss + sum / m).abs());

        let mut perturbed = probs.clone();
        for (i, &c) in codes.iter().enumerate() {
            if c == 85 || c == 170 {
                perturbed.data_mut()[i] = rng.gen_range(0.0..1.0);
            }
        }
        let (wf, wb) = (rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0));
        let a = weighted_bce(&probs, &labels, wf, wb).unwrap();
        let b = weighted_bce(&perturbed, &labels, wf, wb).unwrap();
        void_exact &= a.0 == b.0 && a.1 == b.1;
        void_exact &= codes.iter().enumerate().all(|(i, &c)| !(c == 85 || c == 170) || grad.data()[i] == 0.0);
    }
    let labels = LabelMask::from_codes(4, 1, vec![255, 0, 50, 170]).unwrap();
    let half = weighted_bce(&Tensor::<f64>::full(vec![1, 1, 4], 0.5), &labels, 1.0, 1.0).unwrap().0;
    let ln2_ok = (half - std::f64::consts::LN_2).abs() < 1e-12;
    outcome(
        worst_oracle < 1e-12 && void_exact && ln2_ok,
        format!("oracle deviation {worst_oracle:.1e}, void perturbation exact {void_exact}, p=0.5 loss {half:.6}"),
    )
}

fn determinism() -> Outcome {
    let seq = synth_sequence(&SynthConfig { width: 16, height: 16, n_frames: 6, min_size: 4, max_size: 6, seed: 2, ..SynthConfig::default() }).unwrap();
    let examples: Vec<TrainingExample<f32>> = seq
        .iter()
        .enumerate()
        .map(|(i, (f, l))| TrainingExample { frame: f.to_tensor(), labels: l.clone(), frame_index: i })
        .collect();
    let config = TrainConfig { epochs: 3, seed: 11, ..TrainConfig::for_frames(6) };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let run = || pool.install(|| train(&config, &examples, build_model(None, 11).unwrap()).unwrap());
    let (pa, ha) = run();
    let (pb, hb) = run();
    let history_ok = ha.to_csv() == hb.to_csv() && pa == pb;

    let bytes = WeightContainer::from_params(&pa).to_bytes().unwrap();
    let reloaded: ModelParams<f32> = WeightContainer::from_bytes(&bytes).unwrap().into_params().unwrap();
    let round_trip_ok = reloaded == pa && WeightContainer::from_params(&reloaded).to_bytes().unwrap() == bytes;
    outcome(
        history_ok && round_trip_ok,
        format!("repeated training identical {history_ok}, container round trip byte-identical {round_trip_ok} ({} bytes)", bytes.len()),
    )
}

fn optimizer_unit() -> Outcome {
    let mut params = build_model::<f64>(None, 0).unwrap();
    let li = params.layers.iter().position(|l| l.trainable && l.l2 == 0.0).unwrap();
    params.layers[li].weights.data_mut()[0] = 0.0;
    let mut grads = fgseg::model::ParamGrads {
        layers: params
            .layers
            .iter()
            .map(|l| l.trainable.then(|| (Tensor::zeros(l.weights.shape().to_vec()), Tensor::zeros(l.bias.shape().to_vec()))))
            .collect(),
    };
    grads.layers[li].as_mut().unwrap().0.data_mut()[0] = 1.0;
    let mut state = OptimizerState::new(&params, 0.1, RmsPropConfig { rho: 0.9, epsilon: 1e-8 });
    rmsprop_step(&mut params, &grads, &mut state).unwrap();
    let w = params.layers[li].weights.data()[0];
    let step_ok = (w + 0.316228).abs() < 1e-6;

    let plateau = PlateauConfig::default();
    let mut state = OptimizerState::new(&params, 1e-4, RmsPropConfig::default());
    state.end_epoch(0.5, &plateau);
    let mut fired = Vec::new();
    for epoch in 1..=14 {
        if state.end_epoch(0.5, &plateau) {
            fired.push((epoch, state.lr));
        }
    }
    let schedule_ok = fired.len() == 2
        && fired[0].0 == 6
        && fired[1].0 == 12
        && (fired[0].1 / 1e-4 - 0.1).abs() < 1e-12
        && (fired[1].1 / fired[0].1 - 0.1).abs() < 1e-12;
    outcome(
        step_ok && schedule_ok,
        format!("first step w={w:.6}; plateau cuts after non-improving epochs {:?}", fired.iter().map(|f| f.0).collect::<Vec<_>>()),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "parameter accounting", parameter_accounting()),
        (2, "gradient fidelity", gradient_fidelity()),
        (3, "metric oracle equivalence", metric_oracle()),
        (4, "shape contract", shape_contract()),
    ];
    let (learn, learned) = learnability();
    results.push((5, "end-to-end learnability", learn));
    results.push((6, "threshold-sweep monotonicity", sweep_monotonicity(&learned)));
    results.push((7, "loss semantics", loss_semantics()));
    results.push((8, "determinism and serialization", determinism()));
    results.push((9, "optimizer unit", optimizer_unit()));

    let mut failed = 0;
    for (n, name, o) in &results {
        println!("[{}] {n}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
