use hetembed::config::TrainConfig;
use hetembed::harness::train;
use hetembed::model::Arch;
use std::time::Instant;

fn main() {
    let base = TrainConfig::synthetic_benchmark();
    for (name, arch, s1) in [("linear", Arch::Linear, 0usize), ("cnn", Arch::Cnn, 0), ("cnn_bilstm", Arch::CnnBiLstm, 0), ("full", Arch::CnnBiLstm, 40)] {
        let mut cfg = base.clone();
        cfg.model.arch = arch;
        cfg.stage1.epochs = s1;
        let t0 = Instant::now();
        let out = train(&cfg).unwrap();
        println!("{name}: {:.1}s, s1 epochs {}, s2 epochs {}, final val AP {:.4}",
            t0.elapsed().as_secs_f64(), out.stage1_history.len(), out.stage2_history.len(),
            out.stage2_history.last().map(|e| e.val_average_precision).unwrap_or(f64::NAN));
    }
}
