use hetembed::config::{DataSource, TrainConfig};
use hetembed::embedder::EmbedderConfig;
use hetembed::harness::train;
use hetembed::model::Arch;

fn env<T: std::str::FromStr>(k: &str, d: T) -> T {
    std::env::var(k).ok().and_then(|s| s.parse().ok()).unwrap_or(d)
}

fn main() {
    for seed in [42u64, 45] {
        let mut base = TrainConfig::synthetic_benchmark();
        base.seed = seed;
        if let DataSource::Synthetic(ref mut s) = base.data.source { s.map_gain = 0.7; }
        base.model.embedder = EmbedderConfig { channels: [6, 8, 12], kernel_width: 3, pool_width: 2, roi_bins: 8 };
        base.model.hidden = 32;
        base.optimizer.lr = 1e-2;
        base.stage2.epochs = 100;
        base.stage2.patience = 999;
        base.stage1.epochs = env("S1EP", 3);
        base.stage1.early_stop_accuracy = 1.0;
        base.stage1.patience = 999;
        base.stage2.aux_ext_weight = env("AUX", 0.2);
        for pretrain in [false, true] {
            let mut cfg = base.clone();
            cfg.model.arch = Arch::CnnBiLstm;
            if !pretrain {
                cfg.stage1.epochs = 0;
                cfg.stage2.aux_ext_weight = 0.0;
            }
            let out = train(&cfg).unwrap();
            let tr: Vec<String> = [5usize, 10, 20, 30, 50, 70, 100].iter()
                .filter_map(|&e| out.stage2_history.get(e - 1).map(|h| format!("{:.3}", h.val_average_precision)))
                .collect();
            println!("seed {seed} {}: {}", if pretrain { "d" } else { "c" }, tr.join(" "));
        }
    }
}
