//! Central-difference gradient verification.

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Compares the tape gradient of a scalar function against central
/// finite differences at `point`.
///
/// Returns the maximum over coordinates of
/// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
pub fn grad_check<F>(f: F, point: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    assert!(step > 0.0, "grad_check step must be positive");

    // Analytic gradient through the tape.
    let mut tape = Tape::new();
    let x = tape.param(point.clone());
    let y = f(&mut tape, x)?;
    if !tape.value(y).is_scalar() {
        return Err(Error::NonScalarLoss {
            shape: tape.shape(y).to_vec(),
        });
    }
    let y0 = tape.value(y).item();
    if !y0.is_finite() {
        return Err(Error::NonFinite {
            op: "grad_check",
            value: y0,
        });
    }
    tape.backward(y)?;
    let analytic = tape
        .grad(x)
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; point.numel()]);

    // Central differences, one coordinate at a time.
    let eval = |data: Vec<f64>| -> Result<f64> {
        let mut t = Tape::new();
        let v = t.constant(Tensor::new(point.shape().to_vec(), data)?);
        let out = f(&mut t, v)?;
        Ok(t.value(out).item())
    };

    let mut max_err = 0.0f64;
    for i in 0..point.numel() {
        let mut plus = point.data().to_vec();
        let mut minus = point.data().to_vec();
        plus[i] += step;
        minus[i] -= step;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * step);
        let a = analytic[i];
        let err = (a - numeric).abs() / (1e-8f64).max(a.abs() + numeric.abs());
        if err > max_err {
            max_err = err;
        }
    }
    Ok(max_err)
}

/// Result of [`grad_check_differentiable`].
#[derive(Debug, Clone, Copy)]
pub struct KinkAwareCheck {
    pub max_rel_err: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Like [`grad_check`], but skips coordinates whose probe interval
/// `[x-h, x+h]` straddles a non-differentiable kink (relu corners,
/// pooling argmax switches). A kink is detected by step-instability:
/// the central estimates at steps `h` and `h/2` agree to O(h^2) on a
/// smooth coordinate, while a straddled kink contaminates them
/// differently. The analytic gradient never enters the skip decision,
/// so a wrong backward rule cannot hide behind it.
pub fn grad_check_differentiable<F>(f: F, point: &Tensor, step: f64) -> Result<KinkAwareCheck>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    assert!(step > 0.0, "grad_check step must be positive");

    let mut tape = Tape::new();
    let x = tape.param(point.clone());
    let y = f(&mut tape, x)?;
    if !tape.value(y).is_scalar() {
        return Err(Error::NonScalarLoss {
            shape: tape.shape(y).to_vec(),
        });
    }
    let f0 = tape.value(y).item();
    if !f0.is_finite() {
        return Err(Error::NonFinite {
            op: "grad_check",
            value: f0,
        });
    }
    tape.backward(y)?;
    let analytic = tape
        .grad(x)
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; point.numel()]);

    let eval = |data: Vec<f64>| -> Result<f64> {
        let mut t = Tape::new();
        let v = t.constant(Tensor::new(point.shape().to_vec(), data)?);
        let out = f(&mut t, v)?;
        Ok(t.value(out).item())
    };

    let mut report = KinkAwareCheck {
        max_rel_err: 0.0,
        checked: 0,
        skipped: 0,
    };
    // Three reasons to distrust a coordinate's probe, none of which
    // involves the analytic value:
    //  - disagreeing one-sided slopes (a kink inside [x-t, x+t]);
    //  - step-unstable central estimates (kink contamination that the
    //    jump test undershoots);
    //  - a gradient below the f64 evaluation-noise floor of the
    //    difference quotient, which finite differences cannot certify.
    let t = step;
    const TOL: f64 = 1e-4;
    const EPS: f64 = 2.2e-16;
    for i in 0..point.numel() {
        let at = |delta: f64| -> Result<f64> {
            let mut data = point.data().to_vec();
            data[i] += delta;
            eval(data)
        };
        let fp = at(t)?;
        let fm = at(-t)?;
        let forward = (fp - f0) / t;
        let backward = (f0 - fm) / t;
        if (forward - backward).abs() > TOL * (1e-8f64).max(forward.abs() + backward.abs()) {
            report.skipped += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * t);
        let half = (at(t / 2.0)? - at(-t / 2.0)?) / t;
        if (numeric - half).abs() > TOL * (1e-8f64).max(numeric.abs() + half.abs()) {
            report.skipped += 1;
            continue;
        }
        let a = analytic[i];
        let noise = EPS * (f0.abs() + fp.abs() + fm.abs()) / (2.0 * t);
        if noise > 0.25 * TOL * (1e-8f64).max(2.0 * numeric.abs()) {
            // The quotient is noise-dominated. Both sides agreeing on
            // (numerically) zero is a pass; an analytic gradient well
            // above the noise while the probe sees none is a loud
            // failure; in between nothing can be concluded.
            if a.abs() <= 40.0 * noise {
                report.checked += 1;
            } else if a.abs() < noise / (0.25 * TOL) {
                report.skipped += 1;
            } else {
                let err = (a - numeric).abs() / (1e-8f64).max(a.abs() + numeric.abs());
                report.max_rel_err = report.max_rel_err.max(err);
                report.checked += 1;
            }
            continue;
        }
        let err = (a - numeric).abs() / (1e-8f64).max(a.abs() + numeric.abs());
        report.max_rel_err = report.max_rel_err.max(err);
        report.checked += 1;
    }
    Ok(report)
}
