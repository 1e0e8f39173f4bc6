//! Source-type classifier driving the pretraining stage.
//!
//! A softmax head over the shared embeddings is trained to name each
//! embedding's feature source. Competition among the k source classes
//! pushes the shared embedder toward source-specific representations —
//! the embeddings keep what tells sources apart, instead of collapsing
//! onto their common structure. This is the opposite of
//! gradient-reversal domain adaptation: no reversal layer, no minimax.

use crate::error::{Error, Result};
use crate::tensor::{Tape, Var};

/// Affine logits over source types: `e * W + b` with `W [E x k]`.
pub fn domain_logits(tape: &mut Tape, embedding: Var, w: Var, b: Var) -> Result<Var> {
    let affine = tape.matmul(embedding, w)?;
    tape.add(affine, b)
}

/// Probability distribution over the k source types for one embedding.
pub fn classify_domain(tape: &mut Tape, embedding: Var, w: Var, b: Var) -> Result<Var> {
    let z = domain_logits(tape, embedding, w, b)?;
    tape.softmax(z)
}

/// Mean negative log-likelihood of the true source ids over a batch of
/// `(embedding, source id)` pairs.
pub fn source_nll(tape: &mut Tape, pairs: &[(Var, usize)], w: Var, b: Var) -> Result<Var> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput { op: "source_nll" });
    }
    let mut total: Option<Var> = None;
    for &(e, source) in pairs {
        let z = domain_logits(tape, e, w, b)?;
        let nll = tape.cross_entropy_logits(z, source)?;
        total = Some(match total {
            Some(t) => tape.add(t, nll)?,
            None => nll,
        });
    }
    let total = total.expect("non-empty batch");
    Ok(tape.scale(total, 1.0 / pairs.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::tensor::{grad_check, Tensor};

    #[test]
    fn zero_classifier_is_uniform() {
        let mut tape = Tape::new();
        let e = tape.constant(Tensor::vector(vec![0.3, -0.8, 0.5]));
        let w = tape.constant(Tensor::zeros(vec![3, 4]));
        let b = tape.constant(Tensor::zeros(vec![4]));
        let p = classify_domain(&mut tape, e, w, b).unwrap();
        for &v in tape.data(p) {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_bias_dominates_without_overflow() {
        let mut tape = Tape::new();
        let e = tape.constant(Tensor::vector(vec![1.0, 1.0]));
        let w = tape.constant(Tensor::zeros(vec![2, 3]));
        let b = tape.constant(Tensor::vector(vec![1e4, 0.0, 0.0]));
        let p = classify_domain(&mut tape, e, w, b).unwrap();
        let d = tape.data(p);
        assert!(d[0] > 1.0 - 1e-12 && d.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = Rng::new(8);
        for _ in 0..50 {
            let mut tape = Tape::new();
            let e_data: Vec<f64> = (0..6).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let w_data: Vec<f64> = (0..6 * 3).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let b_data: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let e = tape.constant(Tensor::vector(e_data));
            let w = tape.constant(Tensor::new(vec![6, 3], w_data).unwrap());
            let b = tape.constant(Tensor::vector(b_data));
            let p = classify_domain(&mut tape, e, w, b).unwrap();
            let sum: f64 = tape.data(p).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn classifier_is_permutation_equivariant() {
        // Permuting W's columns, b's entries and the class index
        // permutes the probabilities the same way.
        let mut rng = Rng::new(12);
        let k = 4;
        let e_dim = 5;
        let e_data: Vec<f64> = (0..e_dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let w_data: Vec<f64> = (0..e_dim * k).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let b_data: Vec<f64> = (0..k).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let perm = [2usize, 0, 3, 1];

        let probs = |w_data: &[f64], b_data: &[f64]| -> Vec<f64> {
            let mut tape = Tape::new();
            let e = tape.constant(Tensor::vector(e_data.clone()));
            let w = tape.constant(Tensor::new(vec![e_dim, k], w_data.to_vec()).unwrap());
            let b = tape.constant(Tensor::vector(b_data.to_vec()));
            let p = classify_domain(&mut tape, e, w, b).unwrap();
            tape.data(p).to_vec()
        };

        let base = probs(&w_data, &b_data);
        // Column j of the permuted classifier is column perm[j] of the base.
        let mut w_perm = vec![0.0; e_dim * k];
        let mut b_perm = vec![0.0; k];
        for j in 0..k {
            b_perm[j] = b_data[perm[j]];
            for r in 0..e_dim {
                w_perm[r * k + j] = w_data[r * k + perm[j]];
            }
        }
        let permuted = probs(&w_perm, &b_perm);
        for j in 0..k {
            assert!((permuted[j] - base[perm[j]]).abs() < 1e-14);
        }
    }

    #[test]
    fn perfect_classifier_loss_is_zero_uniform_is_ln_k() {
        let k = 3;
        let e_dim = 2;
        let mut tape = Tape::new();
        let e = tape.constant(Tensor::vector(vec![1.0, -1.0]));
        // Saturated bias makes the true class probability exactly 1.0
        // in double precision.
        let w = tape.constant(Tensor::zeros(vec![e_dim, k]));
        let b_perfect = tape.constant(Tensor::vector(vec![1e4, 0.0, 0.0]));
        let loss = source_nll(&mut tape, &[(e, 0)], w, b_perfect).unwrap();
        assert_eq!(tape.value(loss).item(), 0.0);

        let b_uniform = tape.constant(Tensor::zeros(vec![k]));
        let loss = source_nll(&mut tape, &[(e, 1)], w, b_uniform).unwrap();
        assert_eq!(tape.value(loss).item(), (k as f64).ln());
        // Batch mean of identical per-pair values drifts by at most an
        // ulp through the sum.
        let loss = source_nll(&mut tape, &[(e, 0), (e, 1), (e, 2)], w, b_uniform).unwrap();
        assert!((tape.value(loss).item() - (k as f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let mut tape = Tape::new();
        let w = tape.constant(Tensor::zeros(vec![2, 2]));
        let b = tape.constant(Tensor::zeros(vec![2]));
        assert!(source_nll(&mut tape, &[], w, b).is_err());
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let (e_dim, k) = (4, 3);
        let mut rng = Rng::new(19);
        let n = e_dim * k + k + 2 * e_dim;
        let point = Tensor::vector((0..n).map(|_| rng.uniform(-1.0, 1.0)).collect());
        let err = grad_check(
            |tape, flat| {
                let w = tape.slice(flat, 0, e_dim * k)?;
                let w = tape.reshape(w, vec![e_dim, k])?;
                let b = tape.slice(flat, e_dim * k, e_dim * k + k)?;
                let e0 = tape.slice(flat, e_dim * k + k, e_dim * k + k + e_dim)?;
                let e1 = tape.slice(flat, e_dim * k + k + e_dim, n)?;
                source_nll(tape, &[(e0, 0), (e1, 2)], w, b)
            },
            &point,
            1e-3,
        )
        .unwrap();
        assert!(err < 1e-6, "source_nll grad err {err}");
    }
}
