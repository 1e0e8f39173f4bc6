use hetembed::config::{DataSource, TrainConfig};
use hetembed::embedder::EmbedderConfig;
use hetembed::harness::train;
use hetembed::model::Arch;
use std::time::Instant;

fn main() {
    let gain: f64 = std::env::var("GAIN").unwrap().parse().unwrap();
    let lr: f64 = std::env::var("LR").unwrap().parse().unwrap();
    let epochs: usize = std::env::var("EPOCHS").unwrap().parse().unwrap();
    let hidden: usize = std::env::var("H").map(|s| s.parse().unwrap()).unwrap_or(24);
    let bins: usize = std::env::var("BINS").map(|s| s.parse().unwrap()).unwrap_or(8);
    let seed: u64 = std::env::var("SEED").map(|s| s.parse().unwrap()).unwrap_or(42);
    let mut base = TrainConfig::synthetic_benchmark();
    base.seed = seed;
    if let DataSource::Synthetic(ref mut s) = base.data.source { s.map_gain = gain; }
    base.model.embedder = EmbedderConfig { channels: [6, 8, 12], kernel_width: 3, pool_width: 2, roi_bins: bins };
    base.model.hidden = hidden;
    base.optimizer.lr = lr;
    base.stage2.epochs = epochs;
    base.stage2.patience = epochs;
    let t0 = Instant::now();
    let mut line = format!("gain={gain} lr={lr} ep={epochs} H={hidden} bins={bins} seed={seed}:");
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
