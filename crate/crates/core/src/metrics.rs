//! Multi-label evaluation metrics over ranked scores.
//!
//! All five metrics operate on [`EvalInstance`]s: a real score per
//! label, the true label set, and (for Hamming loss only) the
//! thresholded predicted set. Ranks are 1-based by descending score
//! with ties broken by ascending label index; a tie between a true and
//! a false label counts as a reversed pair in the ranking loss (the
//! comparison is `<=`), which some libraries implement differently.
//!
//! [`oracle`] holds deliberately naive re-implementations used only to
//! cross-check these functions in the test suites.

use crate::data::LabelVector;
use crate::error::{Error, Result};

/// One scored sample.
#[derive(Debug, Clone)]
pub struct EvalInstance {
    /// Raw logits, one per label.
    pub scores: Vec<f64>,
    pub true_set: LabelVector,
    /// Thresholded predictions; only Hamming loss reads these.
    pub pred_set: LabelVector,
}

/// 1-based ranks per label: descending score, ties by ascending index.
#[derive(Debug, Clone)]
pub struct Ranking {
    pub rank: Vec<usize>,
}

impl Ranking {
    pub fn of(scores: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .expect("scores must not be NaN")
                .then(a.cmp(&b))
        });
        let mut rank = vec![0usize; scores.len()];
        for (pos, &label) in order.iter().enumerate() {
            rank[label] = pos + 1;
        }
        Ranking { rank }
    }

    /// Label holding rank 1.
    pub fn top(&self) -> usize {
        self.rank
            .iter()
            .position(|&r| r == 1)
            .expect("a non-empty ranking always has a top label")
    }
}

fn check_non_empty(batch: &[EvalInstance], metric: &'static str) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyInput { op: metric });
    }
    Ok(())
}

fn check_true_sets(batch: &[EvalInstance], metric: &'static str, forbid_full: bool) -> Result<()> {
    for (i, inst) in batch.iter().enumerate() {
        let ones = inst.true_set.count_ones();
        if ones == 0 {
            return Err(Error::MetricUndefined {
                metric,
                reason: format!("instance {i} has an empty true label set"),
            });
        }
        if forbid_full && ones == inst.true_set.q() {
            return Err(Error::MetricUndefined {
                metric,
                reason: format!("instance {i} has a full true label set"),
            });
        }
    }
    Ok(())
}

/// Fraction of misclassified instance-label pairs:
/// `(1/m) sum (1/q) |pred symdiff true|`. 0 is perfect.
pub fn hamming_loss(batch: &[EvalInstance]) -> Result<f64> {
    check_non_empty(batch, "hamming_loss")?;
    let mut total = 0.0;
    for inst in batch {
        let q = inst.true_set.q();
        let diff = (0..q)
            .filter(|&j| inst.true_set.is_set(j) != inst.pred_set.is_set(j))
            .count();
        total += diff as f64 / q as f64;
    }
    Ok(total / batch.len() as f64)
}

/// Fraction of instances whose top-ranked label is not a true label.
pub fn one_error(batch: &[EvalInstance]) -> Result<f64> {
    check_non_empty(batch, "one_error")?;
    check_true_sets(batch, "one_error", false)?;
    let misses = batch
        .iter()
        .filter(|inst| !inst.true_set.is_set(Ranking::of(&inst.scores).top()))
        .count();
    Ok(misses as f64 / batch.len() as f64)
}

/// Mean depth down the ranked list needed to cover every true label,
/// minus one: `mean(max rank over true labels) - 1`.
pub fn coverage(batch: &[EvalInstance]) -> Result<f64> {
    check_non_empty(batch, "coverage")?;
    check_true_sets(batch, "coverage", false)?;
    let mut total = 0.0;
    for inst in batch {
        let ranking = Ranking::of(&inst.scores);
        let deepest = inst
            .true_set
            .ones()
            .map(|j| ranking.rank[j])
            .max()
            .expect("true set checked non-empty");
        total += (deepest - 1) as f64;
    }
    Ok(total / batch.len() as f64)
}

/// Mean fraction of (true, false) label pairs ordered wrongly; a score
/// tie counts as wrongly ordered.
pub fn ranking_loss(batch: &[EvalInstance]) -> Result<f64> {
    check_non_empty(batch, "ranking_loss")?;
    check_true_sets(batch, "ranking_loss", true)?;
    let mut total = 0.0;
    for inst in batch {
        let q = inst.true_set.q();
        let truths: Vec<usize> = inst.true_set.ones().collect();
        let falses: Vec<usize> = (0..q).filter(|&j| !inst.true_set.is_set(j)).collect();
        let mut reversed = 0usize;
        for &t in &truths {
            for &f in &falses {
                if inst.scores[t] <= inst.scores[f] {
                    reversed += 1;
                }
            }
        }
        total += reversed as f64 / (truths.len() * falses.len()) as f64;
    }
    Ok(total / batch.len() as f64)
}

/// Mean over instances of the mean precision at each true label's rank.
pub fn average_precision(batch: &[EvalInstance]) -> Result<f64> {
    check_non_empty(batch, "average_precision")?;
    check_true_sets(batch, "average_precision", false)?;
    let mut total = 0.0;
    for inst in batch {
        let ranking = Ranking::of(&inst.scores);
        let truths: Vec<usize> = inst.true_set.ones().collect();
        let mut inst_sum = 0.0;
        for &t in &truths {
            let r = ranking.rank[t];
            let above = truths.iter().filter(|&&u| ranking.rank[u] <= r).count();
            inst_sum += above as f64 / r as f64;
        }
        total += inst_sum / truths.len() as f64;
    }
    Ok(total / batch.len() as f64)
}

/// All five metrics at once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValues {
    pub hamming_loss: f64,
    pub one_error: f64,
    pub coverage: f64,
    pub ranking_loss: f64,
    pub average_precision: f64,
}

/// One line of a [`MetricReport`].
#[derive(Debug, Clone)]
pub struct MetricRow {
    pub metric: &'static str,
    pub value: f64,
    pub instances_used: usize,
    pub instances_skipped: usize,
}

/// All five metrics over a batch, with instances that violate a
/// metric's preconditions filtered out per metric (and counted) rather
/// than poisoning the whole report. A metric left with no usable
/// instances reports NaN.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    pub fn compute(batch: &[EvalInstance]) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::EmptyInput { op: "metric report" });
        }
        let non_empty: Vec<EvalInstance> = batch
            .iter()
            .filter(|i| i.true_set.count_ones() > 0)
            .cloned()
            .collect();
        let rankable: Vec<EvalInstance> = non_empty
            .iter()
            .filter(|i| i.true_set.count_ones() < i.true_set.q())
            .cloned()
            .collect();
        let m = batch.len();
        let row = |metric: &'static str, sub: &[EvalInstance], f: fn(&[EvalInstance]) -> Result<f64>| {
            MetricRow {
                metric,
                value: if sub.is_empty() {
                    f64::NAN
                } else {
                    f(sub).expect("preconditions filtered")
                },
                instances_used: sub.len(),
                instances_skipped: m - sub.len(),
            }
        };
        Ok(MetricReport {
            rows: vec![
                row("hamming_loss", batch, hamming_loss),
                row("one_error", &non_empty, one_error),
                row("coverage", &non_empty, coverage),
                row("ranking_loss", &rankable, ranking_loss),
                row("average_precision", &non_empty, average_precision),
            ],
        })
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.metric == metric).map(|r| r.value)
    }

    pub fn values(&self) -> MetricValues {
        MetricValues {
            hamming_loss: self.get("hamming_loss").unwrap_or(f64::NAN),
            one_error: self.get("one_error").unwrap_or(f64::NAN),
            coverage: self.get("coverage").unwrap_or(f64::NAN),
            ranking_loss: self.get("ranking_loss").unwrap_or(f64::NAN),
            average_precision: self.get("average_precision").unwrap_or(f64::NAN),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value,instances_used,instances_skipped\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.metric, r.value, r.instances_used, r.instances_skipped
            ));
        }
        out
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<20} {:>12} {:>6} {:>8}\n",
            "metric", "value", "used", "skipped"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<20} {:>12.6} {:>6} {:>8}\n",
                r.metric, r.value, r.instances_used, r.instances_skipped
            ));
        }
        out
    }
}

/// Naive reference implementations for verification.
///
/// These recompute every metric by direct enumeration — ranks by
/// counting comparisons, ranking loss by listing all label pairs —
/// and share no code with the production functions above. Test use
/// only; quadratic in `q` and not meant for large batches.
pub mod oracle {
    use super::EvalInstance;

    /// 1-based rank by counting: strictly greater scores plus earlier
    /// equal scores.
    fn rank_of(scores: &[f64], label: usize) -> usize {
        let mut ahead = 0;
        for (j, &s) in scores.iter().enumerate() {
            if s > scores[label] || (s == scores[label] && j < label) {
                ahead += 1;
            }
        }
        ahead + 1
    }

    pub fn hamming_loss(batch: &[EvalInstance]) -> f64 {
        let mut total = 0.0;
        for inst in batch {
            let q = inst.true_set.q();
            let mut diff = 0usize;
            for j in 0..q {
                let in_true = inst.true_set.is_set(j);
                let in_pred = inst.pred_set.is_set(j);
                if (in_true && !in_pred) || (!in_true && in_pred) {
                    diff += 1;
                }
            }
            total += diff as f64 / q as f64;
        }
        total / batch.len() as f64
    }

    pub fn one_error(batch: &[EvalInstance]) -> f64 {
        let mut misses = 0usize;
        for inst in batch {
            let mut top = 0usize;
            for j in 1..inst.scores.len() {
                if inst.scores[j] > inst.scores[top] {
                    top = j;
                }
            }
            if !inst.true_set.is_set(top) {
                misses += 1;
            }
        }
        misses as f64 / batch.len() as f64
    }

    pub fn coverage(batch: &[EvalInstance]) -> f64 {
        let mut total = 0.0;
        for inst in batch {
            let mut deepest = 0usize;
            for j in 0..inst.true_set.q() {
                if inst.true_set.is_set(j) {
                    deepest = deepest.max(rank_of(&inst.scores, j));
                }
            }
            total += deepest as f64 - 1.0;
        }
        total / batch.len() as f64
    }

    pub fn ranking_loss(batch: &[EvalInstance]) -> f64 {
        let mut total = 0.0;
        for inst in batch {
            let q = inst.true_set.q();
            let mut reversed = 0usize;
            let mut pairs = 0usize;
            for t in 0..q {
                if !inst.true_set.is_set(t) {
                    continue;
                }
                for f in 0..q {
                    if inst.true_set.is_set(f) {
                        continue;
                    }
                    pairs += 1;
                    if inst.scores[t] <= inst.scores[f] {
                        reversed += 1;
                    }
                }
            }
            total += reversed as f64 / pairs as f64;
        }
        total / batch.len() as f64
    }

    pub fn average_precision(batch: &[EvalInstance]) -> f64 {
        let mut total = 0.0;
        for inst in batch {
            let q = inst.true_set.q();
            let mut inst_sum = 0.0;
            let mut n_true = 0usize;
            for t in 0..q {
                if !inst.true_set.is_set(t) {
                    continue;
                }
                n_true += 1;
                let r_t = rank_of(&inst.scores, t);
                let mut above = 0usize;
                for u in 0..q {
                    if inst.true_set.is_set(u) && rank_of(&inst.scores, u) <= r_t {
                        above += 1;
                    }
                }
                inst_sum += above as f64 / r_t as f64;
            }
            total += inst_sum / n_true as f64;
        }
        total / batch.len() as f64
    }

    pub fn all(batch: &[EvalInstance]) -> super::MetricValues {
        super::MetricValues {
            hamming_loss: hamming_loss(batch),
            one_error: one_error(batch),
            coverage: coverage(batch),
            ranking_loss: ranking_loss(batch),
            average_precision: average_precision(batch),
        }
    }
}
