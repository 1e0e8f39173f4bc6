use hetembed::config::{DataSource, TrainConfig};
use hetembed::embedder::EmbedderConfig;
use hetembed::harness::train;
use hetembed::model::Arch;

fn main() {
    let mut base = TrainConfig::synthetic_benchmark();
    base.seed = 42;
    if let DataSource::Synthetic(ref mut s) = base.data.source {
        s.map_gain = 0.7;
        s.aligned_sources = true;
    }
    base.model.embedder = EmbedderConfig { channels: [6, 8, 12], kernel_width: 3, pool_width: 2, roi_bins: 8 };
    base.model.hidden = 32;
    base.optimizer.lr = 1e-2;
    base.stage2.epochs = 100;
    base.stage2.patience = 999;
    base.stage1.epochs = 40;
    base.stage1.early_stop_accuracy = 0.99;
    base.stage1.patience = 5;
    for pretrain in [false, true] {
        let mut cfg = base.clone();
        cfg.model.arch = Arch::CnnBiLstm;
        if !pretrain { cfg.stage1.epochs = 0; }
        let out = train(&cfg).unwrap();
        let losses: Vec<String> = [1usize, 5, 20, 50, 100].iter()
            .filter_map(|&e| out.stage2_history.get(e-1).map(|h| format!("e{e}:loss={:.3},ap={:.3}", h.loss, h.val_average_precision)))
            .collect();
        println!("{} s1_epochs_ran={} {}", if pretrain {"d"} else {"c"}, out.stage1_history.len(), losses.join(" "));
        if pretrain {
            for h in out.stage1_history.iter().take(3) {
                println!("   s1 e{}: loss {:.4} acc {:.3}", h.epoch, h.loss, h.holdout_accuracy);
            }
        }
    }
}
