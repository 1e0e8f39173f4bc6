use super::*;
use crate::data::SynthConfig;
use crate::embedder::EmbedderConfig;
use crate::model::ModelConfig;

/// Small, fast config: tiny embedder over a tiny planted dataset.
fn tiny_cfg() -> TrainConfig {
    let mut cfg = TrainConfig::synthetic_benchmark();
    cfg.model = ModelConfig {
        arch: Arch::CnnBiLstm,
        embedder: EmbedderConfig {
            channels: [2, 3, 4],
            kernel_width: 3,
            pool_width: 2,
            roi_bins: 3,
        },
        hidden: 4,
        threshold: 0.5,
    };
    cfg.data.source = DataSource::Synthetic(SynthConfig {
        domains: 2,
        dims: vec![20, 24],
        labels: 4,
        samples: 40,
        dependency: 0.5,
        signature_amplitude: 1.0,
        noise_std: 0.05,
        linear_map: false,
        map_gain: 2.5,
        aligned_sources: false,
        seed: 0, // overridden by the run seed
    });
    cfg.data.fractions = (0.7, 0.15, 0.15);
    cfg.stage1.epochs = 2;
    cfg.stage2.epochs = 2;
    cfg.seed = 11;
    cfg
}

fn tmp_dir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("hetembed-harness-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn train_is_deterministic_to_the_byte() {
    let cfg = tiny_cfg();
    let d1 = tmp_dir("det1");
    let d2 = tmp_dir("det2");
    train_to_dir(&cfg, &d1).unwrap();
    train_to_dir(&cfg, &d2).unwrap();
    let a = std::fs::read(d1.join("checkpoint.bin")).unwrap();
    let b = std::fs::read(d2.join("checkpoint.bin")).unwrap();
    assert_eq!(a, b);
    // Histories too.
    for f in ["stage1_history.csv", "stage2_history.csv"] {
        assert_eq!(
            std::fs::read(d1.join(f)).unwrap(),
            std::fs::read(d2.join(f)).unwrap()
        );
    }
}

#[test]
fn zero_stage2_epochs_leaves_heads_at_init() {
    let mut cfg = tiny_cfg();
    cfg.stage2.epochs = 0;
    let outcome = train(&cfg).unwrap();
    // Heads must equal a fresh initialization; the embedder must not.
    let fresh = Model::new(
        cfg.model.clone(),
        outcome.model.specs.clone(),
        cfg.q(),
        cfg.seed,
    )
    .unwrap();
    assert_eq!(
        outcome.model.params.block_slice("heads.w").unwrap(),
        fresh.params.block_slice("heads.w").unwrap(),
        "stage 2 never ran, heads must be untouched"
    );
    assert_ne!(
        outcome.model.params.block_slice("embed.conv0.w").unwrap(),
        fresh.params.block_slice("embed.conv0.w").unwrap(),
        "stage 1 ran, the embedder must have moved"
    );
    assert!(outcome.stage2_history.is_empty());
}

#[test]
fn zero_stage1_epochs_returns_history_free_pretrain() {
    let mut cfg = tiny_cfg();
    cfg.stage1.epochs = 0;
    let outcome = train(&cfg).unwrap();
    assert!(outcome.stage1_history.is_empty());
}

#[test]
fn single_source_stage1_is_degenerate() {
    let mut cfg = tiny_cfg();
    cfg.data.source = DataSource::Synthetic(SynthConfig {
        domains: 1,
        dims: vec![20],
        labels: 4,
        samples: 20,
        dependency: 0.0,
        signature_amplitude: 1.0,
        noise_std: 0.05,
        linear_map: false,
        map_gain: 2.5,
        aligned_sources: false,
        seed: 0,
    });
    cfg.stage1.epochs = 2;
    cfg.stage1.patience = 1;
    cfg.stage2.epochs = 1;
    let outcome = train(&cfg).unwrap();
    let last = outcome.stage1_history.last().unwrap();
    assert_eq!(last.holdout_accuracy, 1.0);
    assert!(last.loss < 1e-12, "single-class NLL is 0, got {}", last.loss);
}

#[test]
fn overfit_training_set_reaches_high_ap() {
    // A model driven to near-zero training loss must rank its own
    // training labels nearly perfectly. Validating on the training set
    // itself makes the kept snapshot the memorizing one.
    let mut cfg = tiny_cfg();
    cfg.data.source = DataSource::Synthetic(SynthConfig {
        domains: 2,
        dims: vec![20, 24],
        labels: 4,
        samples: 30,
        dependency: 0.5,
        signature_amplitude: 1.0,
        noise_std: 0.02,
        linear_map: false,
        map_gain: 2.5,
        aligned_sources: false,
        seed: 0,
    });
    cfg.stage2.epochs = 200;
    cfg.stage2.patience = 200;
    cfg.optimizer.lr = 3e-2;
    let ds = load_dataset(&cfg).unwrap();
    let mut model = Model::new(cfg.model.clone(), ds.specs.clone(), cfg.q(), cfg.seed).unwrap();
    model.standardizer = Standardizer::fit(&ds).unwrap();
    let history =
        train_stage2(&mut model, &ds, &ds, &cfg.stage2, &cfg.optimizer, cfg.seed).unwrap();
    assert!(
        history.last().unwrap().loss < 0.05,
        "final loss {}",
        history.last().unwrap().loss
    );
    let report = evaluate(&model, &ds).unwrap();
    let ap = report.get("average_precision").unwrap();
    assert!(ap > 0.99, "training-set AP {ap}");
}

#[test]
fn zero_heads_predict_every_label() {
    let cfg = tiny_cfg();
    let ds = load_dataset(&cfg).unwrap();
    let mut model = Model::new(cfg.model.clone(), ds.specs.clone(), cfg.q(), cfg.seed).unwrap();
    // Zero out the heads: logits become 0, sigmoid 0.5, threshold met.
    let heads_w = model
        .params
        .blocks()
        .iter()
        .find(|b| b.name == "heads.w")
        .map(|b| (b.offset, b.len()))
        .unwrap();
    model.params.data_mut()[heads_w.0..heads_w.0 + heads_w.1].fill(0.0);
    let preds = predict(&model, &ds).unwrap();
    assert_eq!(preds.len(), ds.m());
    for p in &preds {
        assert_eq!(p.labels.count_ones(), cfg.q());
        assert!(!p.empty);
    }
}

#[test]
fn prediction_flags_count_empty_sets() {
    let cfg = tiny_cfg();
    let ds = load_dataset(&cfg).unwrap();
    let mut model = Model::new(cfg.model.clone(), ds.specs.clone(), cfg.q(), cfg.seed).unwrap();
    // Strongly negative head biases force empty predictions.
    let heads_b = model
        .params
        .blocks()
        .iter()
        .find(|b| b.name == "heads.b")
        .map(|b| (b.offset, b.len()))
        .unwrap();
    let heads_w = model
        .params
        .blocks()
        .iter()
        .find(|b| b.name == "heads.w")
        .map(|b| (b.offset, b.len()))
        .unwrap();
    model.params.data_mut()[heads_w.0..heads_w.0 + heads_w.1].fill(0.0);
    model.params.data_mut()[heads_b.0..heads_b.0 + heads_b.1].fill(-20.0);
    let preds = predict(&model, &ds).unwrap();
    let flagged = preds.iter().filter(|p| p.empty).count();
    let manual = preds.iter().filter(|p| p.labels.count_ones() == 0).count();
    assert_eq!(flagged, preds.len());
    assert_eq!(flagged, manual);

    let csv = predictions_to_csv(&preds, cfg.q());
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), preds.len() + 1);
    assert!(lines[0].ends_with("empty_prediction"));
    assert!(lines[1].ends_with(",1"));
}

#[test]
fn evaluate_rejects_empty_and_unlabelled_data() {
    let cfg = tiny_cfg();
    let ds = load_dataset(&cfg).unwrap();
    let model = Model::new(cfg.model.clone(), ds.specs.clone(), cfg.q(), cfg.seed).unwrap();
    let empty = Dataset {
        specs: ds.specs.clone(),
        records: Vec::new(),
    };
    assert!(matches!(
        evaluate(&model, &empty),
        Err(Error::EmptyInput { .. })
    ));

    let mut unlabelled = ds.clone();
    for r in &mut unlabelled.records {
        r.label = None;
    }
    assert!(matches!(
        evaluate(&model, &unlabelled),
        Err(Error::MissingLabel { .. })
    ));

    let mut broken = ds.clone();
    broken.records[0].features.remove(&1);
    assert!(matches!(
        evaluate(&model, &broken),
        Err(Error::MissingSource { .. })
    ));
}

#[test]
fn ladder_shares_splits_and_has_four_rows() {
    let mut cfg = tiny_cfg();
    cfg.stage1.epochs = 1;
    cfg.stage2.epochs = 1;
    let report = run_ablation_ladder(&cfg, &[3, 4]).unwrap();
    assert_eq!(report.variants.len(), 4);
    assert_eq!(report.split_checksums.len(), 2);
    for v in &report.variants {
        assert_eq!(v.per_seed.len(), 2);
    }
    let csv = report.to_csv();
    assert_eq!(csv.lines().count(), 5, "header + one row per variant");
    // Same seed list means same checksum column in every row.
    let checksum_cols: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert!(checksum_cols.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn same_seed_same_report() {
    let mut cfg = tiny_cfg();
    cfg.stage1.epochs = 1;
    cfg.stage2.epochs = 2;
    let run = || {
        let outcome = train(&cfg).unwrap();
        let ds = load_dataset(&cfg).unwrap();
        let (_, _, test_ds) = split_dataset(&cfg, &ds).unwrap();
        evaluate(&outcome.model, &test_ds).unwrap().to_csv()
    };
    assert_eq!(run(), run());
}
