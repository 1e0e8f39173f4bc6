use hetembed::config::{DataSource, TrainConfig};
use hetembed::embedder::EmbedderConfig;
use hetembed::harness::train;
use hetembed::model::Arch;
use std::time::Instant;

fn main() {
    let mut base = TrainConfig::synthetic_benchmark();
    if let DataSource::Synthetic(ref mut s) = base.data.source { s.map_gain = 2.0; }
    base.model.embedder = EmbedderConfig { channels: [6, 8, 12], kernel_width: 3, pool_width: 2, roi_bins: 8 };
    base.model.hidden = 24;
    base.optimizer.lr = 1e-2;
    base.stage2.epochs = 400;
    base.stage2.patience = 400;
    base.stage1.epochs = 100;
    base.stage1.patience = 10;

    for (name, arch, s1) in [("lin", Arch::Linear, 0usize), ("full", Arch::CnnBiLstm, 100)] {
        let mut cfg = base.clone();
        cfg.model.arch = arch;
        cfg.stage1.epochs = s1;
        let t0 = Instant::now();
        let out = train(&cfg).unwrap();
        let hist: Vec<f64> = out.stage2_history.iter().map(|e| e.val_average_precision).collect();
        let best = hist.iter().cloned().fold(f64::NAN, f64::max);
        let best_ep = hist.iter().position(|&v| v == best).unwrap() + 1;
        let probe: Vec<String> = [10, 50, 100, 200, 300, 400].iter()
            .filter_map(|&e| hist.get(e - 1).map(|v| format!("e{e}={v:.3}"))).collect();
        println!("{name}: best={best:.4} @epoch {best_ep} ({}) [{:.0}s]", probe.join(" "), t0.elapsed().as_secs_f64());
    }
}
