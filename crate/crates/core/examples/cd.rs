use hetembed::config::{DataSource, TrainConfig};
use hetembed::embedder::EmbedderConfig;
use hetembed::harness::train;
use hetembed::model::Arch;

fn env<T: std::str::FromStr>(k: &str, d: T) -> T {
    std::env::var(k).ok().and_then(|s| s.parse().ok()).unwrap_or(d)
}

fn main() {
    let seeds: Vec<u64> = vec![42, 43, 44, 45, 46];
    let n: usize = env("NSEEDS", 3);
    let mut deltas = Vec::new();
    for &seed in seeds.iter().take(n) {
        let mut base = TrainConfig::synthetic_benchmark();
        base.seed = seed;
        if let DataSource::Synthetic(ref mut s) = base.data.source {
            s.map_gain = env("GAIN", 0.7);
            s.aligned_sources = env::<u8>("SHARED", 1) == 1;
            let d0: usize = env("DIM0", 48);
            let d1: usize = env("DIM1", 56);
            let d2: usize = env("DIM2", 64);
            s.dims = vec![d0, d1, d2];
        }
        base.model.embedder = EmbedderConfig {
            channels: [6, 8, 12],
            kernel_width: 3,
            pool_width: 2,
            roi_bins: 8,
        };
        base.model.hidden = env("H", 32);
        base.optimizer.lr = env("LR", 1e-2);
        base.stage2.epochs = env("EPOCHS", 100);
        base.stage2.patience = 999;
        base.stage1.epochs = env("S1EP", 40);
        base.stage1.batch_size = env("S1BATCH", 32);
        base.stage1.early_stop_accuracy = env("S1ACC", 0.99);
        base.stage1.patience = env("S1PAT", 5);
        base.stage2.aux_ext_weight = env("AUX", 0.0);

        let run = |pretrain: bool| -> f64 {
            let mut cfg = base.clone();
            cfg.model.arch = Arch::CnnBiLstm;
            if !pretrain {
                cfg.stage1.epochs = 0;
                cfg.stage2.aux_ext_weight = 0.0;
            }
            let out = train(&cfg).unwrap();
            out.stage2_history.iter().map(|e| e.val_average_precision).fold(f64::NAN, f64::max)
        };
        let c = run(false);
        let d = run(true);
        println!("  seed {seed}: c={c:.4} d={d:.4} delta={:+.4}", d - c);
        deltas.push(d - c);
    }
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("median delta: {:+.4}", deltas[deltas.len() / 2]);
}
