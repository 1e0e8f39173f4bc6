//! Two-stage training orchestration, evaluation, prediction and the
//! baseline/ablation ladder.
//!
//! Stage 1 pretrains the shared embedder through the source-type
//! classifier; stage 2 fine-tunes everything (embedder included) under
//! the multi-label objective, optionally keeping a weighted
//! source-classification term in the mix. Both loops are
//! single-threaded and draw every random choice from the run seed, so
//! a (config, data) pair maps to one byte-exact checkpoint. Evaluation
//! fans out across records against the frozen model; `HETEMBED_THREADS`
//! caps that parallelism.

use crate::config::{fnv1a, DataSource, Stage1Config, Stage2Config, TrainConfig};
use crate::data::{
    assemble_dataset, load_domain_csv, load_labels_csv, split, synth_generate, CompoundRecord,
    Dataset, DomainSpec, LabelVector, Standardizer,
};
use crate::error::{Error, Result};
use crate::extractor::source_nll;
use crate::metrics::{average_precision, EvalInstance, MetricReport, MetricValues};
use crate::model::{Arch, Model};
use crate::optim::{Optimizer, OptimizerConfig};
use crate::predictor::{label_loss, predict_labels};
use crate::rng::Rng;
use crate::tensor::{Tape, Var};
use std::io::Write;
use std::path::Path;

/// One stage-1 epoch: mean train loss and holdout source accuracy.
#[derive(Debug, Clone, Copy)]
pub struct Stage1Epoch {
    pub epoch: usize,
    pub loss: f64,
    pub holdout_accuracy: f64,
}

/// One stage-2 epoch: mean train loss and validation average precision.
#[derive(Debug, Clone, Copy)]
pub struct Stage2Epoch {
    pub epoch: usize,
    pub loss: f64,
    pub val_average_precision: f64,
}

/// Everything `train` produces besides the files.
#[derive(Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub stage1_history: Vec<Stage1Epoch>,
    pub stage2_history: Vec<Stage2Epoch>,
    /// FNV-1a over the ordered record ids of train|val|test.
    pub split_checksum: u64,
}

/// Materializes the configured data source. Synthetic sources follow
/// the run seed, so one seed pins data, split and initialization alike.
pub fn load_dataset(cfg: &TrainConfig) -> Result<Dataset> {
    match &cfg.data.source {
        DataSource::Synthetic(synth) => {
            let mut synth = synth.clone();
            synth.seed = cfg.seed;
            synth_generate(&synth)
        }
        DataSource::Csv {
            labels,
            domains,
            label_path,
            replicate_on,
        } => {
            let mut specs = Vec::with_capacity(domains.len());
            let mut maps = Vec::with_capacity(domains.len());
            for d in domains {
                let spec = DomainSpec {
                    id: d.id,
                    name: d.name.clone(),
                    dim: d.dim,
                };
                maps.push(load_domain_csv(&d.path, &spec)?);
                specs.push(spec);
            }
            let label_map = match label_path {
                Some(p) => load_labels_csv(p, *labels)?,
                None => Default::default(),
            };
            assemble_dataset(&maps, &specs, &label_map, *replicate_on, cfg.data.mean_impute)
        }
    }
}

/// Splits per the config's fractions under the run seed.
pub fn split_dataset(cfg: &TrainConfig, ds: &Dataset) -> Result<(Dataset, Dataset, Dataset)> {
    split(ds, cfg.data.fractions, cfg.seed, cfg.data.group_by_compound)
}

fn split_checksum(parts: &[&Dataset]) -> u64 {
    let mut joined = String::new();
    for part in parts {
        for rec in &part.records {
            joined.push_str(&rec.id);
            joined.push(',');
        }
        joined.push('|');
    }
    fnv1a(joined.as_bytes())
}

fn shuffled_indices(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    idx
}

fn mean_of(tape: &mut Tape, terms: &[Var]) -> Result<Var> {
    let mut total = terms[0];
    for &t in &terms[1..] {
        total = tape.add(total, t)?;
    }
    Ok(tape.scale(total, 1.0 / terms.len() as f64))
}

/// Stage 1: minimizes the source-type NLL over every (record, source)
/// pair. Every record contributes one pair per source, so each batch
/// holds all k source types. Returns the per-epoch history; stops
/// early once holdout accuracy sustains the configured level.
pub fn pretrain_stage1(
    model: &mut Model,
    train: &Dataset,
    holdout: &Dataset,
    s1: &Stage1Config,
    opt_cfg: &OptimizerConfig,
    seed: u64,
) -> Result<Vec<Stage1Epoch>> {
    if s1.epochs == 0 {
        return Ok(Vec::new());
    }
    if model.cfg.arch == Arch::Linear {
        return Err(Error::Config(
            "stage 1 needs an embedder architecture".into(),
        ));
    }
    if train.m() == 0 {
        return Err(Error::EmptyInput { op: "pretrain_stage1" });
    }

    let mut opt = Optimizer::new(opt_cfg, model.params.len());
    let mut rng = Rng::substream(seed, "stage1-shuffle");
    let mut history = Vec::new();
    let mut streak = 0usize;

    for epoch in 1..=s1.epochs {
        let order = shuffled_indices(train.m(), &mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (batch_idx, chunk) in order.chunks(s1.batch_size).enumerate() {
            let mut tape = Tape::new();
            let vars = model.bind(&mut tape);
            let (w, b) = vars.extractor.expect("embedder arch has an extractor");
            let mut pairs = Vec::with_capacity(chunk.len() * model.k());
            for &i in chunk {
                let embeddings = model.embed_record(&mut tape, &vars, &train.records[i])?;
                for (source, e) in embeddings.into_iter().enumerate() {
                    pairs.push((e, source));
                }
            }
            let loss = source_nll(&mut tape, &pairs, w, b)?;
            let loss_val = tape.value(loss).item();
            if !loss_val.is_finite() {
                return Err(Error::NonFiniteLoss {
                    stage: 1,
                    epoch,
                    batch: batch_idx,
                    loss: loss_val,
                });
            }
            tape.backward(loss)?;
            let grads = model.params.gather_grads(&tape, &vars.all);
            opt.step(model.params.data_mut(), &grads);
            loss_sum += loss_val;
            batches += 1;
        }

        let holdout_accuracy = source_accuracy(model, holdout)?;
        history.push(Stage1Epoch {
            epoch,
            loss: loss_sum / batches as f64,
            holdout_accuracy,
        });

        streak = if holdout_accuracy >= s1.early_stop_accuracy {
            streak + 1
        } else {
            0
        };
        if streak >= s1.patience {
            break;
        }
    }
    Ok(history)
}

/// Holdout source-classification accuracy over all (record, source)
/// pairs, by softmax argmax (first index on ties).
pub fn source_accuracy(model: &Model, ds: &Dataset) -> Result<f64> {
    if ds.m() == 0 {
        return Ok(1.0);
    }
    let hits: Vec<usize> = parallel_map(&ds.records, |rec| {
        let mut tape = Tape::new();
        let vars = model.bind(&mut tape);
        let (w, b) = vars.extractor.expect("embedder arch has an extractor");
        let embeddings = model.embed_record(&mut tape, &vars, rec)?;
        let mut correct = 0usize;
        for (source, e) in embeddings.into_iter().enumerate() {
            let p = crate::extractor::classify_domain(&mut tape, e, w, b)?;
            let probs = tape.data(p);
            let argmax = probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            if argmax == source {
                correct += 1;
            }
        }
        Ok(correct)
    })?;
    let total_pairs = ds.m() * model.k();
    Ok(hits.iter().sum::<usize>() as f64 / total_pairs as f64)
}

/// Stage 2: minimizes the per-label sigmoid cross-entropy (mean over
/// the batch of per-record label sums), fine-tuning the embedder along
/// with the sequence encoder and heads. Keeps the parameters from the
/// best validation-AP epoch; stops early after `patience` epochs
/// without improvement.
pub fn train_stage2(
    model: &mut Model,
    train: &Dataset,
    val: &Dataset,
    s2: &Stage2Config,
    opt_cfg: &OptimizerConfig,
    seed: u64,
) -> Result<Vec<Stage2Epoch>> {
    if s2.epochs == 0 {
        return Ok(Vec::new());
    }
    if train.m() == 0 {
        return Err(Error::EmptyInput { op: "train_stage2" });
    }
    if val.m() == 0 {
        return Err(Error::Config(
            "validation split is empty; adjust split fractions".into(),
        ));
    }

    let mut opt = Optimizer::new(opt_cfg, model.params.len());
    let mut rng = Rng::substream(seed, "stage2-shuffle");
    let mut history = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut since_best = 0usize;

    for epoch in 1..=s2.epochs {
        let order = shuffled_indices(train.m(), &mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (batch_idx, chunk) in order.chunks(s2.batch_size).enumerate() {
            let mut tape = Tape::new();
            let vars = model.bind(&mut tape);
            let mut label_terms = Vec::with_capacity(chunk.len());
            let mut aux_pairs = Vec::new();
            for &i in chunk {
                let rec = &train.records[i];
                let label = rec.label.as_ref().ok_or_else(|| Error::MissingLabel {
                    id: rec.id.clone(),
                })?;
                let logits = if model.cfg.arch == Arch::Linear {
                    model.scores(&mut tape, &vars, rec)?
                } else {
                    let embeddings = model.embed_record(&mut tape, &vars, rec)?;
                    if s2.aux_ext_weight > 0.0 {
                        for (source, &e) in embeddings.iter().enumerate() {
                            aux_pairs.push((e, source));
                        }
                    }
                    model.scores_from_embeddings(&mut tape, &vars, &embeddings)?
                };
                label_terms.push(label_loss(&mut tape, logits, label)?);
            }
            let mut loss = mean_of(&mut tape, &label_terms)?;
            if !aux_pairs.is_empty() {
                let (w, b) = vars.extractor.expect("embedder arch has an extractor");
                let aux = source_nll(&mut tape, &aux_pairs, w, b)?;
                let aux = tape.scale(aux, s2.aux_ext_weight);
                loss = tape.add(loss, aux)?;
            }
            let loss_val = tape.value(loss).item();
            if !loss_val.is_finite() {
                return Err(Error::NonFiniteLoss {
                    stage: 2,
                    epoch,
                    batch: batch_idx,
                    loss: loss_val,
                });
            }
            tape.backward(loss)?;
            let grads = model.params.gather_grads(&tape, &vars.all);
            opt.step(model.params.data_mut(), &grads);
            loss_sum += loss_val;
            batches += 1;
        }

        let val_ap = validation_ap(model, val)?;
        history.push(Stage2Epoch {
            epoch,
            loss: loss_sum / batches as f64,
            val_average_precision: val_ap,
        });

        let improved = best.as_ref().is_none_or(|(b, _)| val_ap > *b);
        if improved {
            best = Some((val_ap, model.params.data().to_vec()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= s2.patience {
                break;
            }
        }
    }

    if let Some((_, params)) = best {
        model.params.data_mut().copy_from_slice(&params);
    }
    Ok(history)
}

fn validation_ap(model: &Model, val: &Dataset) -> Result<f64> {
    let instances = score_dataset(model, val, true)?;
    let usable: Vec<EvalInstance> = instances
        .into_iter()
        .filter(|i| i.true_set.count_ones() > 0)
        .collect();
    if usable.is_empty() {
        return Err(Error::MetricUndefined {
            metric: "average_precision",
            reason: "no validation instance has a non-empty label set".into(),
        });
    }
    average_precision(&usable)
}

/// Caps evaluation fan-out; training never parallelizes.
fn thread_cap() -> usize {
    std::env::var("HETEMBED_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Order-preserving parallel map over records. Results are identical
/// to the serial path whatever the thread count.
fn parallel_map<T, F>(records: &[CompoundRecord], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&CompoundRecord) -> Result<T> + Sync,
{
    let threads = thread_cap().min(records.len().max(1));
    if threads <= 1 {
        return records.iter().map(&f).collect();
    }
    let chunk_size = records.len().div_ceil(threads);
    let chunks: Vec<&[CompoundRecord]> = records.chunks(chunk_size).collect();
    let results: Vec<Result<Vec<T>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| scope.spawn(|| chunk.iter().map(&f).collect::<Result<Vec<T>>>()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(records.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Scores every record; with `need_labels`, records without labels are
/// an error, otherwise they yield empty true sets.
fn score_dataset(model: &Model, ds: &Dataset, need_labels: bool) -> Result<Vec<EvalInstance>> {
    parallel_map(&ds.records, |rec| {
        let mut tape = Tape::new();
        let vars = model.bind(&mut tape);
        let logits = model.scores(&mut tape, &vars, rec)?;
        let scores = tape.data(logits).to_vec();
        let true_set = match (&rec.label, need_labels) {
            (Some(l), _) => l.clone(),
            (None, false) => LabelVector::new(vec![false; model.q]),
            (None, true) => {
                return Err(Error::MissingLabel {
                    id: rec.id.clone(),
                })
            }
        };
        let pred_set = predict_labels(&scores, model.cfg.threshold)?;
        Ok(EvalInstance {
            scores,
            true_set,
            pred_set,
        })
    })
}

/// Rescales the parameter blocks that read embeddings so their inputs
/// are effectively unit-RMS at the current embedder state. The
/// downstream initialization assumes unit-variance inputs; after
/// pretraining (or an unlucky draw) embedding magnitudes can drift far
/// from that, saturating the sequence encoder's gates before stage 2
/// gets a chance to learn. Runs identically whether or not stage 1
/// happened.
fn calibrate_embedding_readers(model: &mut Model, train: &Dataset) -> Result<()> {
    if model.cfg.arch == Arch::Linear || train.m() == 0 {
        return Ok(());
    }
    let sample = train.records.len().min(32);
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for rec in &train.records[..sample] {
        let mut tape = Tape::new();
        let vars = model.bind(&mut tape);
        for e in model.embed_record(&mut tape, &vars, rec)? {
            for v in tape.data(e) {
                sum_sq += v * v;
            }
            count += tape.value(e).numel();
        }
    }
    let rms = (sum_sq / count.max(1) as f64).sqrt();
    // Only tame oversized embeddings; undersized ones are harmless to
    // the gates and amplifying them invites instability.
    if !(rms.is_finite() && rms > 1.0) {
        return Ok(());
    }
    let scale = 1.0 / rms;
    let targets: &[&str] = match model.cfg.arch {
        Arch::CnnBiLstm => &["seq.fwd.w_x", "seq.bwd.w_x"],
        Arch::Cnn => &["heads.w"],
        Arch::Linear => &[],
    };
    let spans: Vec<(usize, usize)> = model
        .params
        .blocks()
        .iter()
        .filter(|b| targets.contains(&b.name.as_str()))
        .map(|b| (b.offset, b.len()))
        .collect();
    for (offset, len) in spans {
        for v in &mut model.params.data_mut()[offset..offset + len] {
            *v *= scale;
        }
    }
    Ok(())
}

/// Runs both stages per the config and returns the trained model plus
/// histories. Pure function of (config, data, seed) down to the bytes
/// of the parameters.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    let (train_ds, val_ds, test_ds) = split_dataset(cfg, &ds)?;
    let checksum = split_checksum(&[&train_ds, &val_ds, &test_ds]);

    let mut model = Model::new(cfg.model.clone(), ds.specs.clone(), cfg.q(), cfg.seed)?;
    model.standardizer = Standardizer::fit(&train_ds)?;

    let stage1_history = if model.cfg.arch != Arch::Linear && cfg.stage1.epochs > 0 {
        pretrain_stage1(
            &mut model,
            &train_ds,
            &val_ds,
            &cfg.stage1,
            &cfg.optimizer,
            cfg.seed,
        )?
    } else {
        Vec::new()
    };

    if cfg.stage2.epochs > 0 {
        calibrate_embedding_readers(&mut model, &train_ds)?;
    }

    let stage2_history = train_stage2(
        &mut model,
        &train_ds,
        &val_ds,
        &cfg.stage2,
        &cfg.optimizer,
        cfg.seed,
    )?;

    Ok(TrainOutcome {
        model,
        stage1_history,
        stage2_history,
        split_checksum: checksum,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// `train` plus artifacts: checkpoint and history CSVs under `out`.
pub fn train_to_dir(cfg: &TrainConfig, out: &Path) -> Result<TrainOutcome> {
    let outcome = train(cfg)?;
    let mut s1 = String::from("epoch,loss,holdout_accuracy\n");
    for e in &outcome.stage1_history {
        s1.push_str(&format!("{},{},{}\n", e.epoch, e.loss, e.holdout_accuracy));
    }
    write_file(&out.join("stage1_history.csv"), &s1)?;
    let mut s2 = String::from("epoch,loss,val_average_precision\n");
    for e in &outcome.stage2_history {
        s2.push_str(&format!(
            "{},{},{}\n",
            e.epoch, e.loss, e.val_average_precision
        ));
    }
    write_file(&out.join("stage2_history.csv"), &s2)?;
    crate::checkpoint::save(&out.join("checkpoint.bin"), &outcome.model, cfg.hash())?;
    Ok(outcome)
}

/// All five metrics over a labelled dataset.
pub fn evaluate(model: &Model, ds: &Dataset) -> Result<MetricReport> {
    if ds.m() == 0 {
        return Err(Error::EmptyInput { op: "evaluate" });
    }
    let instances = score_dataset(model, ds, true)?;
    MetricReport::compute(&instances)
}

/// One prediction row.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub id: String,
    pub logits: Vec<f64>,
    pub labels: LabelVector,
    /// Set when the thresholded label set came out empty.
    pub empty: bool,
}

/// Scores a dataset (labels optional) into per-record logits and
/// thresholded label sets, flagging records that receive no label.
pub fn predict(model: &Model, ds: &Dataset) -> Result<Vec<Prediction>> {
    if ds.m() == 0 {
        return Err(Error::EmptyInput { op: "predict" });
    }
    let instances = score_dataset(model, ds, false)?;
    Ok(ds
        .records
        .iter()
        .zip(instances)
        .map(|(rec, inst)| {
            let empty = inst.pred_set.count_ones() == 0;
            Prediction {
                id: rec.id.clone(),
                logits: inst.scores,
                labels: inst.pred_set,
                empty,
            }
        })
        .collect())
}

/// Serializes predictions as CSV
/// (`id,logit_<name>...,pred_<name>...,empty_prediction`).
pub fn predictions_to_csv(preds: &[Prediction], q: usize) -> String {
    let names = crate::data::label_names(q);
    let mut header = String::from("id");
    for n in &names {
        header.push_str(&format!(",logit_{n}"));
    }
    for n in &names {
        header.push_str(&format!(",pred_{n}"));
    }
    header.push_str(",empty_prediction\n");
    let mut out = header;
    for p in preds {
        out.push_str(&p.id);
        for l in &p.logits {
            out.push_str(&format!(",{l}"));
        }
        for b in p.labels.bits() {
            out.push_str(if *b { ",1" } else { ",0" });
        }
        out.push_str(if p.empty { ",1\n" } else { ",0\n" });
    }
    out
}

/// The four ladder rungs, in report order.
pub const LADDER: [(&str, Arch, bool); 4] = [
    ("linear_combination", Arch::Linear, false),
    ("cnn", Arch::Cnn, false),
    ("cnn_bilstm", Arch::CnnBiLstm, false),
    ("cnn_bilstm_pretrained", Arch::CnnBiLstm, true),
];

/// Per-variant ladder results: medians across seeds plus the raw
/// per-seed values.
#[derive(Debug, Clone)]
pub struct VariantResult {
    pub name: &'static str,
    pub median: MetricValues,
    pub per_seed: Vec<MetricValues>,
}

#[derive(Debug, Clone)]
pub struct AblationReport {
    pub variants: Vec<VariantResult>,
    pub seeds: Vec<u64>,
    /// One checksum per seed, shared by all variants of that seed.
    pub split_checksums: Vec<u64>,
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn median_values(values: &[MetricValues]) -> MetricValues {
    let pick = |f: fn(&MetricValues) -> f64| {
        let mut xs: Vec<f64> = values.iter().map(f).collect();
        median(&mut xs)
    };
    MetricValues {
        hamming_loss: pick(|v| v.hamming_loss),
        one_error: pick(|v| v.one_error),
        coverage: pick(|v| v.coverage),
        ranking_loss: pick(|v| v.ranking_loss),
        average_precision: pick(|v| v.average_precision),
    }
}

/// Trains all four ladder variants on identical per-seed splits and
/// evaluates each on the validation split. The non-pretrained rungs
/// run with stage 1 disabled; everything else (data, split, epochs,
/// optimizer, initialization seed) is shared.
pub fn run_ablation_ladder(cfg: &TrainConfig, seeds: &[u64]) -> Result<AblationReport> {
    if seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one seed".into()));
    }
    let mut per_variant: Vec<Vec<MetricValues>> = vec![Vec::new(); LADDER.len()];
    let mut split_checksums = Vec::with_capacity(seeds.len());

    for &seed in seeds {
        let mut checksum_for_seed: Option<u64> = None;
        for (v, (name, arch, pretrain)) in LADDER.iter().enumerate() {
            let mut run_cfg = cfg.clone();
            run_cfg.seed = seed;
            run_cfg.model.arch = *arch;
            if !pretrain {
                run_cfg.stage1.epochs = 0;
            }
            let outcome = train(&run_cfg)?;
            match checksum_for_seed {
                None => checksum_for_seed = Some(outcome.split_checksum),
                Some(c) => {
                    if c != outcome.split_checksum {
                        return Err(Error::Config(format!(
                            "variant '{name}' saw a different split (checksum {:#x} vs {:#x})",
                            outcome.split_checksum, c
                        )));
                    }
                }
            }
            let ds = load_dataset(&run_cfg)?;
            let (_, val_ds, _) = split_dataset(&run_cfg, &ds)?;
            let report = evaluate(&outcome.model, &val_ds)?;
            per_variant[v].push(report.values());
        }
        split_checksums.push(checksum_for_seed.expect("at least one variant ran"));
    }

    Ok(AblationReport {
        variants: LADDER
            .iter()
            .zip(per_variant)
            .map(|((name, _, _), per_seed)| VariantResult {
                name,
                median: median_values(&per_seed),
                per_seed,
            })
            .collect(),
        seeds: seeds.to_vec(),
        split_checksums,
    })
}

impl AblationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "variant,hamming_loss,one_error,coverage,ranking_loss,average_precision,split_checksums\n",
        );
        let checksums = self
            .split_checksums
            .iter()
            .map(|c| format!("{c:016x}"))
            .collect::<Vec<_>>()
            .join("|");
        for v in &self.variants {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                v.name,
                v.median.hamming_loss,
                v.median.one_error,
                v.median.coverage,
                v.median.ranking_loss,
                v.median.average_precision,
                checksums
            ));
        }
        out
    }

    pub fn per_seed_csv(&self) -> String {
        let mut out =
            String::from("variant,seed,hamming_loss,one_error,coverage,ranking_loss,average_precision\n");
        for v in &self.variants {
            for (seed, m) in self.seeds.iter().zip(&v.per_seed) {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    v.name,
                    seed,
                    m.hamming_loss,
                    m.one_error,
                    m.coverage,
                    m.ranking_loss,
                    m.average_precision
                ));
            }
        }
        out
    }

    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{:<24} {:>12} {:>10} {:>10} {:>12} {:>10}\n",
            "variant", "hamming", "one_error", "coverage", "ranking_loss", "avg_prec"
        );
        for v in &self.variants {
            out.push_str(&format!(
                "{:<24} {:>12.4} {:>10.4} {:>10.4} {:>12.4} {:>10.4}\n",
                v.name,
                v.median.hamming_loss,
                v.median.one_error,
                v.median.coverage,
                v.median.ranking_loss,
                v.median.average_precision
            ));
        }
        out.push_str(&format!(
            "splits per seed: {}\n",
            self.split_checksums
                .iter()
                .map(|c| format!("{c:016x}"))
                .collect::<Vec<_>>()
                .join(" ")
        ));
        out
    }

    pub fn variant(&self, name: &str) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.name == name)
    }
}

/// Writes the full ladder artifacts (median table + per-seed CSV).
pub fn ablation_to_dir(report: &AblationReport, out: &Path) -> Result<()> {
    write_file(&out.join("ablation.csv"), &report.to_csv())?;
    write_file(&out.join("ablation_per_seed.csv"), &report.per_seed_csv())?;
    Ok(())
}

/// Writes a metric report CSV next to a rendered table, returning the
/// table for printing.
pub fn report_to_dir(report: &MetricReport, out: &Path, name: &str) -> Result<String> {
    write_file(&out.join(name), &report.to_csv())?;
    Ok(report.render_table())
}

/// Writes predictions CSV.
pub fn predictions_to_dir(preds: &[Prediction], q: usize, out: &Path) -> Result<()> {
    let csv = predictions_to_csv(preds, q);
    let path = out.join("predictions.csv");
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    let mut f = std::fs::File::create(&path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    f.write_all(csv.as_bytes())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests;
