//! Sequence encoder and multi-label heads.
//!
//! The k per-source embeddings are read as a length-k sequence by two
//! LSTMs running in opposite directions; the concatenation of their
//! final states feeds q independent binary classifiers trained with the
//! stable sigmoid cross-entropy. Source order is the canonical
//! `DomainSpec::id` order — the sequence axis carries no time meaning,
//! and the direction symmetry test below pins the construction.

use crate::data::LabelVector;
use crate::error::{Error, Result};
use crate::tensor::{LstmCellVars, Tape, Tensor, Var};

/// Runs the forward cell over `inputs` and the backward cell over the
/// reversed sequence, returning `h_fwd_final (+) h_bwd_final` (length
/// `2 * hidden`).
pub fn encode_sequence(
    tape: &mut Tape,
    inputs: &[Var],
    fwd: &LstmCellVars,
    bwd: &LstmCellVars,
    hidden: usize,
) -> Result<Var> {
    if inputs.is_empty() {
        return Err(Error::EmptyInput {
            op: "encode_sequence",
        });
    }
    let run = |tape: &mut Tape, cell: &LstmCellVars, order: &mut dyn Iterator<Item = Var>| -> Result<Var> {
        let mut h = tape.constant(Tensor::zeros(vec![hidden]));
        let mut c = tape.constant(Tensor::zeros(vec![hidden]));
        for x in order {
            (h, c) = tape.lstm_cell(x, h, c, cell)?;
        }
        Ok(h)
    };
    let h_fwd = run(tape, fwd, &mut inputs.iter().copied())?;
    let h_bwd = run(tape, bwd, &mut inputs.iter().rev().copied())?;
    tape.concat(&[h_fwd, h_bwd])
}

/// Per-record label loss: stable sigmoid cross-entropy summed over the
/// q labels (Eq. (4)-style `max(x,0) - x*y + ln(1+exp(-|x|))`).
pub fn label_loss(tape: &mut Tape, logits: Var, label: &LabelVector) -> Result<Var> {
    let y = tape.constant(Tensor::vector(label.as_f64()));
    tape.bce_with_logits(logits, y)
}

/// Numerically safe logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Thresholds logits into a predicted label set; bit j is set iff
/// `sigmoid(logit_j) >= threshold`, so zero logits at the default 0.5
/// threshold predict every label.
pub fn predict_labels(logits: &[f64], threshold: f64) -> Result<LabelVector> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::BadThreshold(threshold));
    }
    Ok(LabelVector::new(
        logits.iter().map(|&l| sigmoid(l) >= threshold).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::tensor::grad_check;

    fn cell_param_count(dim: usize, hidden: usize) -> usize {
        4 * hidden * dim + 4 * hidden * hidden + 4 * hidden
    }

    fn bind_cell(tape: &mut Tape, dim: usize, hidden: usize, data: &[f64]) -> LstmCellVars {
        let (a, b) = (4 * hidden * dim, 4 * hidden * (dim + hidden));
        LstmCellVars {
            w_x: tape.constant(Tensor::new(vec![4 * hidden, dim], data[..a].to_vec()).unwrap()),
            w_h: tape.constant(Tensor::new(vec![4 * hidden, hidden], data[a..b].to_vec()).unwrap()),
            b: tape.constant(Tensor::vector(data[b..].to_vec())),
        }
    }

    fn random_cell_data(dim: usize, hidden: usize, rng: &mut Rng) -> Vec<f64> {
        (0..cell_param_count(dim, hidden))
            .map(|_| rng.uniform(-0.6, 0.6))
            .collect()
    }

    #[test]
    fn single_step_sequence_has_2h_output() {
        let (dim, hidden) = (5, 4);
        let mut rng = Rng::new(3);
        let mut tape = Tape::new();
        let fwd_data = random_cell_data(dim, hidden, &mut rng);
        let bwd_data = random_cell_data(dim, hidden, &mut rng);
        let fwd = bind_cell(&mut tape, dim, hidden, &fwd_data);
        let bwd = bind_cell(&mut tape, dim, hidden, &bwd_data);
        let x = tape.constant(Tensor::vector(vec![0.1, -0.4, 0.9, 0.0, 0.3]));
        let out = encode_sequence(&mut tape, &[x], &fwd, &bwd, hidden).unwrap();
        assert_eq!(tape.shape(out), &[2 * hidden]);
    }

    #[test]
    fn output_dim_is_2h_for_any_sequence_length() {
        let (dim, hidden) = (3, 2);
        let mut rng = Rng::new(4);
        for k in 1..=5 {
            let mut tape = Tape::new();
            let fwd_data = random_cell_data(dim, hidden, &mut rng);
            let bwd_data = random_cell_data(dim, hidden, &mut rng);
            let fwd = bind_cell(&mut tape, dim, hidden, &fwd_data);
            let bwd = bind_cell(&mut tape, dim, hidden, &bwd_data);
            let seq: Vec<Var> = (0..k)
                .map(|_| {
                    let data: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
                    tape.constant(Tensor::vector(data))
                })
                .collect();
            let out = encode_sequence(&mut tape, &seq, &fwd, &bwd, hidden).unwrap();
            assert_eq!(tape.shape(out), &[2 * hidden]);
        }
    }

    #[test]
    fn zero_parameters_encode_to_zero() {
        let (dim, hidden) = (4, 3);
        let mut tape = Tape::new();
        let zeros = vec![0.0; cell_param_count(dim, hidden)];
        let fwd = bind_cell(&mut tape, dim, hidden, &zeros);
        let bwd = bind_cell(&mut tape, dim, hidden, &zeros);
        let seq: Vec<Var> = (0..3)
            .map(|i| tape.constant(Tensor::vector(vec![i as f64; dim])))
            .collect();
        let out = encode_sequence(&mut tape, &seq, &fwd, &bwd, hidden).unwrap();
        assert!(tape.data(out).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let mut tape = Tape::new();
        let zeros = vec![0.0; cell_param_count(2, 2)];
        let fwd = bind_cell(&mut tape, 2, 2, &zeros);
        let bwd = bind_cell(&mut tape, 2, 2, &zeros);
        assert!(encode_sequence(&mut tape, &[], &fwd, &bwd, 2).is_err());
    }

    #[test]
    fn reversing_inputs_with_swapped_cells_swaps_halves() {
        // encode(reverse(seq), bwd-as-fwd, fwd-as-bwd) must equal the
        // original output with its halves exchanged.
        let (dim, hidden) = (3, 2);
        let mut rng = Rng::new(21);
        let fwd_data = random_cell_data(dim, hidden, &mut rng);
        let bwd_data = random_cell_data(dim, hidden, &mut rng);
        let seq_data: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .collect();

        let encode = |inputs: &[Vec<f64>], first: &[f64], second: &[f64]| -> Vec<f64> {
            let mut tape = Tape::new();
            let a = bind_cell(&mut tape, dim, hidden, first);
            let b = bind_cell(&mut tape, dim, hidden, second);
            let seq: Vec<Var> = inputs
                .iter()
                .map(|v| tape.constant(Tensor::vector(v.clone())))
                .collect();
            let out = encode_sequence(&mut tape, &seq, &a, &b, hidden).unwrap();
            tape.data(out).to_vec()
        };

        let original = encode(&seq_data, &fwd_data, &bwd_data);
        let reversed_seq: Vec<Vec<f64>> = seq_data.iter().rev().cloned().collect();
        let swapped = encode(&reversed_seq, &bwd_data, &fwd_data);

        let (orig_fwd, orig_bwd) = original.split_at(hidden);
        let (swap_fwd, swap_bwd) = swapped.split_at(hidden);
        assert_eq!(orig_fwd, swap_bwd);
        assert_eq!(orig_bwd, swap_fwd);
    }

    #[test]
    fn label_loss_analytic_values() {
        let mut tape = Tape::new();
        // x = 0, y = 1 for each of two labels: per-label ln 2, summed.
        let logits = tape.constant(Tensor::vector(vec![0.0, 0.0]));
        let loss = label_loss(&mut tape, logits, &LabelVector::new(vec![true, true])).unwrap();
        assert!((tape.value(loss).item() - 2.0 * 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn label_loss_matches_naive_form_and_stays_finite() {
        let naive = |x: f64, y: f64| -> f64 {
            let s = sigmoid(x);
            -(y * s.ln() + (1.0 - y) * (1.0 - s).ln())
        };
        // 10,001-point grid across |x| <= 10.
        for i in 0..=10_000 {
            let x = -10.0 + i as f64 * (20.0 / 10_000.0);
            for y in [0.0, 1.0] {
                let mut tape = Tape::new();
                let logits = tape.constant(Tensor::vector(vec![x]));
                let label = LabelVector::new(vec![y == 1.0]);
                let loss = label_loss(&mut tape, logits, &label).unwrap();
                let got = tape.value(loss).item();
                assert!(
                    (got - naive(x, y)).abs() < 1e-6,
                    "x={x} y={y}: {got} vs naive {}",
                    naive(x, y)
                );
            }
        }
        // Extreme logits stay finite and non-negative.
        for x in [-1e4, -40.0, 40.0, 1e4] {
            for y in [false, true] {
                let mut tape = Tape::new();
                let logits = tape.constant(Tensor::vector(vec![x]));
                let loss = label_loss(&mut tape, logits, &LabelVector::new(vec![y])).unwrap();
                let v = tape.value(loss).item();
                assert!(v.is_finite() && v >= 0.0, "x={x} y={y}: {v}");
            }
        }
        // Confident correct logits drive the loss below 1e-8.
        for (x, y) in [(40.0, true), (-40.0, false)] {
            let mut tape = Tape::new();
            let logits = tape.constant(Tensor::vector(vec![x]));
            let loss = label_loss(&mut tape, logits, &LabelVector::new(vec![y])).unwrap();
            assert!(tape.value(loss).item() < 1e-8);
        }
    }

    #[test]
    fn predict_labels_boundary_and_values() {
        let all = predict_labels(&[0.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(all.count_ones(), 3, "sigmoid(0)=0.5 meets a 0.5 threshold");

        let mixed = predict_labels(&[5.0, -5.0], 0.5).unwrap();
        assert_eq!(mixed.bits(), &[true, false]);

        assert!(matches!(
            predict_labels(&[0.0], 0.0),
            Err(Error::BadThreshold(_))
        ));
        assert!(matches!(
            predict_labels(&[0.0], 1.0),
            Err(Error::BadThreshold(_))
        ));
    }

    #[test]
    fn encoder_gradient_matches_finite_differences() {
        let (dim, hidden, k) = (3, 2, 3);
        let n_cell = cell_param_count(dim, hidden);
        let mut rng = Rng::new(33);
        let point = Tensor::vector(
            (0..2 * n_cell + k * dim)
                .map(|_| rng.uniform(-0.6, 0.6))
                .collect(),
        );
        let err = grad_check(
            |tape, flat| {
                let mut off = 0;
                let mut take = |tape: &mut Tape, n: usize| -> Result<Var> {
                    let s = tape.slice(flat, off, off + n)?;
                    off += n;
                    Ok(s)
                };
                let mut cell = |tape: &mut Tape| -> Result<LstmCellVars> {
                    let a = 4 * hidden * dim;
                    let b = 4 * hidden * hidden;
                    let wx = take(tape, a)?;
                    let wx = tape.reshape(wx, vec![4 * hidden, dim])?;
                    let wh = take(tape, b)?;
                    let wh = tape.reshape(wh, vec![4 * hidden, hidden])?;
                    let bias = take(tape, 4 * hidden)?;
                    Ok(LstmCellVars {
                        w_x: wx,
                        w_h: wh,
                        b: bias,
                    })
                };
                let fwd = cell(tape)?;
                let bwd = cell(tape)?;
                let seq: Vec<Var> = (0..k)
                    .map(|_| take(tape, dim))
                    .collect::<Result<_>>()?;
                let out = encode_sequence(tape, &seq, &fwd, &bwd, hidden)?;
                Ok(tape.sum(out))
            },
            &point,
            1e-3,
        )
        .unwrap();
        assert!(err < 1e-4, "encoder grad err {err}");
    }
}
