use hetembed::config::TrainConfig;
use hetembed::harness::run_ablation_ladder;
use std::time::Instant;

fn main() {
    let mut cfg = TrainConfig::synthetic_benchmark();
    if let Ok(lr) = std::env::var("LR") { cfg.optimizer.lr = lr.parse().unwrap(); }
    if let Ok(e) = std::env::var("EPOCHS") { cfg.stage2.epochs = e.parse().unwrap(); }
    let t0 = Instant::now();
    let report = run_ablation_ladder(&cfg, &[42, 43, 44, 45, 46]).unwrap();
    println!("elapsed: {:.1}s", t0.elapsed().as_secs_f64());
    print!("{}", report.render_table());
    for v in &report.variants {
        let aps: Vec<String> = v.per_seed.iter().map(|m| format!("{:.4}", m.average_precision)).collect();
        println!("{:<24} per-seed AP: {}", v.name, aps.join(" "));
    }
}
