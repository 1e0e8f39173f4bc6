use hetembed::config::{DataSource, TrainConfig};
use hetembed::data::SynthConfig;
use hetembed::embedder::EmbedderConfig;
use hetembed::harness::train;
use hetembed::model::Arch;
use std::time::Instant;

fn main() {
    let gain: f64 = std::env::var("GAIN").unwrap().parse().unwrap();
    let lr: f64 = std::env::var("LR").unwrap().parse().unwrap();
    let epochs: usize = std::env::var("EPOCHS").unwrap().parse().unwrap();
    let dim0: usize = std::env::var("DIM").map(|s| s.parse().unwrap()).unwrap_or(192);
    let seed: u64 = std::env::var("SEED").map(|s| s.parse().unwrap()).unwrap_or(42);
    let mut base = TrainConfig::synthetic_benchmark();
    base.seed = seed;
    base.data.source = DataSource::Synthetic(SynthConfig {
        domains: 3,
        dims: vec![dim0, dim0 + 32, dim0 + 64],
        labels: 14,
        samples: 600,
        dependency: 0.8,
        signature_amplitude: 1.0,
        noise_std: 0.05,
        linear_map: false,
        map_gain: gain,
        seed: 0,
    });
    base.model.embedder = EmbedderConfig { channels: [6, 8, 12], kernel_width: 3, pool_width: 2, roi_bins: 8 };
    base.model.hidden = 24;
    base.optimizer.lr = lr;
    base.stage2.epochs = epochs;
    base.stage2.patience = epochs;
    let t0 = Instant::now();
    let mut line = format!("gain={gain} lr={lr} ep={epochs} dim={dim0} seed={seed}:");
    for (name, arch, s1) in [("lin", Arch::Linear, 0usize), ("cnn", Arch::Cnn, 0), ("lstm", Arch::CnnBiLstm, 0), ("full", Arch::CnnBiLstm, 40)] {
        let mut cfg = base.clone();
        cfg.model.arch = arch;
        cfg.stage1.epochs = s1;
        let out = train(&cfg).unwrap();
        let best = out.stage2_history.iter().map(|e| e.val_average_precision).fold(f64::NAN, f64::max);
        line.push_str(&format!(" {name}={best:.4}"));
        if s1 > 0 {
            let acc = out.stage1_history.last().map(|e| e.holdout_accuracy).unwrap_or(f64::NAN);
            line.push_str(&format!(" (s1acc={acc:.3},{}ep)", out.stage1_history.len()));
        }
    }
    println!("{line} [{:.0}s]", t0.elapsed().as_secs_f64());
}
