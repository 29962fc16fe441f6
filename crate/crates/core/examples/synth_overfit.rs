use std::time::Instant;

use fgseg::data::synth::{synth_sequence, SynthConfig};
use fgseg::metrics::{accumulate_probs, compute_metrics, ConfusionCounts};
use fgseg::model::{build_model, Network};
use fgseg::training::{select_frames, train_with_observer, TrainConfig, TrainingExample};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(60);
    let seq = synth_sequence(&SynthConfig { n_frames: 100, seed: 7, ..SynthConfig::default() }).unwrap();
    let picked = select_frames(seq.len(), 50, 7, None).unwrap();
    let examples: Vec<TrainingExample<f32>> = picked
        .iter()
        .map(|&i| TrainingExample { frame: seq[i].0.to_tensor(), labels: seq[i].1.clone(), frame_index: i })
        .collect();
    let cfg = TrainConfig { epochs, seed: 7, ..TrainConfig::for_frames(50) };
    let t = Instant::now();
    let (params, hist) = train_with_observer(&cfg, &examples, build_model(None, 7).unwrap(), &mut |r| {
        eprintln!("{:3} {:.5} {:.5} {:e} {:.0}s", r.epoch, r.train_loss, r.val_loss, r.lr, t.elapsed().as_secs_f64())
    })
    .unwrap();
    eprintln!("checkpoint {}", hist.checkpoint_epoch);
    let net = Network::new(params).unwrap();
    let mut c = ConfusionCounts::default();
    for i in (0..seq.len()).filter(|i| !picked.contains(i)) {
        let p = net.predict(&seq[i].0.to_tensor()).unwrap();
        c = c.merge(accumulate_probs(&p, &seq[i].1, 0.8).unwrap());
    }
    let r = compute_metrics(c);
    println!("{c:?} F {:.4} MCC {:.4} time {:.0}s", r.f_measure, r.mcc, t.elapsed().as_secs_f64());
}
