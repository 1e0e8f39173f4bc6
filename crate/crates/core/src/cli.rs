//! Command-line interface.
//!
//! Exit codes: 0 success, 1 domain error (bad data, failed training,
//! missing files), 2 usage error. All randomness in a run derives from
//! one seed (`--seed` overrides the config's).

use crate::config::{CsvDomain, DataSource, TrainConfig};
use crate::data::{label_names, load_labels_csv, synth_generate, write_dataset_csvs, SynthConfig};
use crate::error::{Error, Result};
use crate::harness;
use crate::metrics::{EvalInstance, MetricReport};
use crate::model::Model;
use crate::predictor::predict_labels;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(
    name = "hetembed",
    about = "Two-stage multi-source embedding and multi-label prediction",
    version
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config seed; every random choice derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for generated files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generates a synthetic dataset as CSV files plus a ready config.
    GenData(GenDataArgs),
    /// Runs both training stages and writes checkpoint + histories.
    Train,
    /// Scores a labelled split with all five metrics.
    Evaluate(EvalArgs),
    /// Writes per-record logits and thresholded label sets.
    Predict(EvalArgs),
    /// Trains the four-variant ladder on shared splits.
    Ablate(AblateArgs),
    /// Verifies every operation's gradient against finite differences.
    Gradcheck,
    /// Computes the five metrics from score and label files.
    Metrics(MetricsArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[arg(long, default_value_t = 3)]
    domains: usize,
    /// Comma-separated raw lengths, one per domain.
    #[arg(long, value_delimiter = ',', default_values_t = vec![48usize, 56, 64])]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 14)]
    labels: usize,
    #[arg(long, default_value_t = 600)]
    samples: usize,
    #[arg(long, default_value_t = 0.8)]
    dependency: f64,
    #[arg(long, default_value_t = 1.0)]
    signature_amplitude: f64,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// Replace the planted tanh maps with linear ones.
    #[arg(long)]
    linear_map: bool,
    /// Pre-activation gain of the planted maps.
    #[arg(long, default_value_t = 2.5)]
    map_gain: f64,
    /// Align sources: shared atom layout with rotated label wiring.
    #[arg(long)]
    aligned_sources: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SplitChoice {
    Train,
    Val,
    Test,
    All,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Checkpoint produced by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitChoice::Test)]
    split: SplitChoice,
}

#[derive(Args, Debug)]
struct AblateArgs {
    /// Number of seeds (seed, seed+1, ...) to aggregate over.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    /// CSV of logits: header `id,<name>...`, one row per record.
    #[arg(long)]
    scores: PathBuf,
    /// Label CSV with matching ids.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

/// Parses `argv` and runs. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints --help/--version to stdout (exit 0) and
            // usage errors to stderr (exit 2).
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_config(cli_config: &Option<PathBuf>, seed: Option<u64>) -> Result<TrainConfig> {
    let mut cfg = match cli_config {
        Some(path) => TrainConfig::from_file(path)?,
        None => TrainConfig::synthetic_benchmark(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(args) => gen_data(&cli, args),
        Command::Train => {
            let cfg = load_config(&cli.config, cli.seed)?;
            let outcome = harness::train_to_dir(&cfg, &cli.out)?;
            println!(
                "trained: {} stage-1 epochs, {} stage-2 epochs, split checksum {:016x}",
                outcome.stage1_history.len(),
                outcome.stage2_history.len(),
                outcome.split_checksum
            );
            println!("wrote {}", cli.out.join("checkpoint.bin").display());
            Ok(())
        }
        Command::Evaluate(args) => {
            let cfg = load_config(&cli.config, cli.seed)?;
            let model = restore(&cfg, &args.checkpoint)?;
            let ds = pick_split(&cfg, args.split)?;
            let report = harness::evaluate(&model, &ds)?;
            let table = harness::report_to_dir(&report, &cli.out, "metrics.csv")?;
            print!("{table}");
            Ok(())
        }
        Command::Predict(args) => {
            let cfg = load_config(&cli.config, cli.seed)?;
            let model = restore(&cfg, &args.checkpoint)?;
            let ds = pick_split(&cfg, args.split)?;
            let preds = harness::predict(&model, &ds)?;
            harness::predictions_to_dir(&preds, cfg.q(), &cli.out)?;
            let empty = preds.iter().filter(|p| p.empty).count();
            println!(
                "predicted {} records ({} with an empty label set) -> {}",
                preds.len(),
                empty,
                cli.out.join("predictions.csv").display()
            );
            Ok(())
        }
        Command::Ablate(args) => {
            let cfg = load_config(&cli.config, cli.seed)?;
            if args.seeds == 0 {
                return Err(Error::Config("--seeds must be at least 1".into()));
            }
            let seeds: Vec<u64> = (0..args.seeds).map(|i| cfg.seed + i).collect();
            let report = harness::run_ablation_ladder(&cfg, &seeds)?;
            harness::ablation_to_dir(&report, &cli.out)?;
            print!("{}", report.render_table());
            Ok(())
        }
        Command::Gradcheck => {
            let seed = cli.seed.unwrap_or(2024);
            let results = crate::gradsuite::run(seed)?;
            print!("{}", crate::gradsuite::render(&results));
            if crate::gradsuite::suite_passed(&results) {
                Ok(())
            } else {
                Err(Error::Config("gradient checks failed".into()))
            }
        }
        Command::Metrics(args) => {
            let report = metrics_from_files(&args.scores, &args.labels, args.threshold)?;
            let table = harness::report_to_dir(&report, &cli.out, "metrics.csv")?;
            print!("{table}");
            Ok(())
        }
    }
}

fn gen_data(cli: &Cli, args: &GenDataArgs) -> Result<()> {
    let synth = SynthConfig {
        domains: args.domains,
        dims: args.dims.clone(),
        labels: args.labels,
        samples: args.samples,
        dependency: args.dependency,
        signature_amplitude: args.signature_amplitude,
        noise_std: args.noise,
        linear_map: args.linear_map,
        map_gain: args.map_gain,
        aligned_sources: args.aligned_sources,
        seed: cli.seed.unwrap_or(42),
    };
    let ds = synth_generate(&synth)?;
    let paths = write_dataset_csvs(&ds, &cli.out)?;
    for p in &paths {
        println!("wrote {}", p.display());
    }

    // A ready-to-train config pointing at the emitted files.
    let mut cfg = match &cli.config {
        Some(path) => TrainConfig::from_file(path)?,
        None => TrainConfig::synthetic_benchmark(),
    };
    cfg.seed = synth.seed;
    cfg.data.source = DataSource::Csv {
        labels: args.labels,
        domains: ds
            .specs
            .iter()
            .map(|s| CsvDomain {
                id: s.id,
                name: s.name.clone(),
                dim: s.dim,
                path: cli.out.join(format!("domain_{}.csv", s.id)),
            })
            .collect(),
        label_path: Some(cli.out.join("labels.csv")),
        replicate_on: None,
    };
    let cfg_path = cli.out.join("gen_config.json");
    std::fs::write(&cfg_path, cfg.to_json())
        .map_err(|e| Error::io(format!("writing {}", cfg_path.display()), e))?;
    println!("wrote {}", cfg_path.display());
    Ok(())
}

fn restore(cfg: &TrainConfig, checkpoint: &Path) -> Result<Model> {
    let raw = crate::checkpoint::load(checkpoint)?;
    let ds = harness::load_dataset(cfg)?;
    crate::checkpoint::restore_model(&cfg.model, ds.specs, cfg.q(), raw, cfg.hash())
}

fn pick_split(cfg: &TrainConfig, choice: SplitChoice) -> Result<crate::data::Dataset> {
    let ds = harness::load_dataset(cfg)?;
    if choice == SplitChoice::All {
        return Ok(ds);
    }
    let (train, val, test) = harness::split_dataset(cfg, &ds)?;
    Ok(match choice {
        SplitChoice::Train => train,
        SplitChoice::Val => val,
        SplitChoice::Test => test,
        SplitChoice::All => unreachable!(),
    })
}

/// Joins a score file and a label file into eval instances, in score
/// file order.
fn metrics_from_files(scores: &Path, labels: &Path, threshold: f64) -> Result<MetricReport> {
    let rows = read_scores_csv(scores)?;
    if rows.is_empty() {
        return Err(Error::EmptyInput { op: "metrics" });
    }
    let q = rows[0].1.len();
    let label_map = load_labels_csv(labels, q)?;
    let mut instances = Vec::with_capacity(rows.len());
    for (id, logits) in rows {
        let true_set = label_map
            .get(&id)
            .cloned()
            .ok_or_else(|| Error::MissingLabel { id: id.clone() })?;
        let pred_set = predict_labels(&logits, threshold)?;
        instances.push(EvalInstance {
            scores: logits,
            true_set,
            pred_set,
        });
    }
    MetricReport::compute(&instances)
}

fn read_scores_csv(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    if !path.exists() {
        return Err(Error::MissingFile {
            path: path.to_path_buf(),
        });
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::RaggedRow {
        path: path.to_path_buf(),
        row: 1,
        got: 0,
        expected: 2,
    })?;
    let cols = header.split(',').count();
    if cols < 2 {
        return Err(Error::WrongDimension {
            path: path.to_path_buf(),
            name: "scores".into(),
            got: cols.saturating_sub(1),
            expected: 1,
        });
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let row = i + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                row,
                got: cells.len(),
                expected: cols,
            });
        }
        let mut vals = Vec::with_capacity(cols - 1);
        for (c, cell) in cells[1..].iter().enumerate() {
            let v: f64 = cell.trim().parse().unwrap_or(f64::NAN);
            if !v.is_finite() {
                return Err(Error::BadCell {
                    path: path.to_path_buf(),
                    row,
                    col: c + 2,
                    cell: cell.trim().to_string(),
                });
            }
            vals.push(v);
        }
        out.push((cells[0].trim().to_string(), vals));
    }
    Ok(out)
}

/// Writes a score CSV in the layout `metrics` reads back.
pub fn write_scores_csv(path: &Path, q: usize, rows: &[(String, Vec<f64>)]) -> Result<()> {
    let mut out = String::from("id");
    for n in label_names(q) {
        out.push(',');
        out.push_str(&n);
    }
    out.push('\n');
    for (id, scores) in rows {
        out.push_str(id);
        for s in scores {
            out.push_str(&format!(",{s}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
