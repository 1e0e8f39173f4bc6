use hetembed::config::{DataSource, TrainConfig};
use hetembed::embedder::EmbedderConfig;
use hetembed::harness::train;
use hetembed::model::Arch;
use std::time::Instant;

fn env<T: std::str::FromStr>(k: &str, d: T) -> T {
    std::env::var(k).ok().and_then(|s| s.parse().ok()).unwrap_or(d)
}

fn main() {
    let mut base = TrainConfig::synthetic_benchmark();
    base.seed = env("SEED", 42);
    if let DataSource::Synthetic(ref mut s) = base.data.source {
        s.map_gain = env("GAIN", 0.7);
        s.noise_std = env("NOISE", 0.05);
    }
    base.model.embedder = EmbedderConfig {
        channels: [6, 8, 12],
        kernel_width: 3,
        pool_width: 2,
        roi_bins: env("BINS", 8),
    };
    base.model.hidden = env("H", 24);
    base.optimizer.lr = env("LR", 1e-2);
    base.stage2.epochs = env("EPOCHS", 120);
    base.stage2.patience = env("PATIENCE", 999);
    base.stage1.epochs = env("S1EP", 40);
    base.stage1.early_stop_accuracy = env("S1ACC", 0.95);
    base.stage1.patience = env("S1PAT", 2);
    let t0 = Instant::now();
    let mut line = String::new();
    for (name, arch, s1) in [("lin", Arch::Linear, 0usize), ("cnn", Arch::Cnn, 0), ("lstm", Arch::CnnBiLstm, 0), ("full", Arch::CnnBiLstm, base.stage1.epochs)] {
        let mut cfg = base.clone();
        cfg.model.arch = arch;
        cfg.stage1.epochs = s1;
        let out = train(&cfg).unwrap();
        let best = out.stage2_history.iter().map(|e| e.val_average_precision).fold(f64::NAN, f64::max);
        line.push_str(&format!(" {name}={best:.4}"));
        if s1 > 0 {
            line.push_str(&format!("(s1:{}ep)", out.stage1_history.len()));
        }
    }
    println!("seed={} H={} lr={}:{line} [{:.0}s]", base.seed, base.model.hidden, base.optimizer.lr, t0.elapsed().as_secs_f64());
}
