//! First-order optimizers over the flat parameter buffer.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptKind::Adam,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.lr <= 0.0 || self.eps <= 0.0 {
            return Err(crate::Error::Config(
                "learning rate and eps must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(crate::Error::Config("betas must lie in [0,1)".into()));
        }
        Ok(())
    }
}

/// Optimizer state sized to one parameter vector.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        cfg: OptimizerConfig,
        t: u64,
        m: Vec<f64>,
        v: Vec<f64>,
    },
}

impl Optimizer {
    pub fn new(cfg: &OptimizerConfig, n: usize) -> Self {
        match cfg.kind {
            OptKind::Sgd => Optimizer::Sgd { lr: cfg.lr },
            OptKind::Adam => Optimizer::Adam {
                cfg: cfg.clone(),
                t: 0,
                m: vec![0.0; n],
                v: vec![0.0; n],
            },
        }
    }

    /// One update in place. `params` and `grads` must both match the
    /// state length.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= *lr * g;
                }
            }
            Optimizer::Adam { cfg, t, m, v } => {
                *t += 1;
                let bias1 = 1.0 - cfg.beta1.powi(*t as i32);
                let bias2 = 1.0 - cfg.beta2.powi(*t as i32);
                for i in 0..params.len() {
                    let g = grads[i];
                    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                    let m_hat = m[i] / bias1;
                    let v_hat = v[i] / bias2;
                    params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
                }
            }
        }
    }
}
