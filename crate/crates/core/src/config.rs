//! Run configuration: one JSON document drives data, model, training
//! and evaluation. Every random choice in a run derives from the
//! single `seed`, including the synthetic generator's (its own seed
//! field is overridden by the run seed).

use crate::data::SynthConfig;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::optim::OptimizerConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Config {
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop once holdout source accuracy stays at or above this...
    pub early_stop_accuracy: f64,
    /// ...for this many consecutive epochs.
    pub patience: usize,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Stage1Config {
            epochs: 200,
            batch_size: 32,
            early_stop_accuracy: 0.99,
            patience: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Config {
    pub epochs: usize,
    pub batch_size: usize,
    /// Weight of the auxiliary source-classification term kept in the
    /// fine-tuning objective; 0 trains purely sequentially.
    pub aux_ext_weight: f64,
    /// Early-stopping patience on validation average precision.
    pub patience: usize,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Stage2Config {
            epochs: 300,
            batch_size: 32,
            aux_ext_weight: 0.0,
            patience: 20,
        }
    }
}

/// Where records come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// One CSV per source plus an optional label file.
    Csv {
        labels: usize,
        domains: Vec<CsvDomain>,
        label_path: Option<PathBuf>,
        replicate_on: Option<usize>,
    },
    Synthetic(SynthConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvDomain {
    pub id: usize,
    pub name: String,
    pub dim: usize,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub source: DataSource,
    pub fractions: (f64, f64, f64),
    pub group_by_compound: bool,
    pub mean_impute: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub stage1: Stage1Config,
    pub stage2: Stage2Config,
    pub optimizer: OptimizerConfig,
    pub model: ModelConfig,
    pub data: DataConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 42,
            stage1: Stage1Config::default(),
            stage2: Stage2Config::default(),
            optimizer: OptimizerConfig::default(),
            model: ModelConfig::default(),
            data: DataConfig {
                source: DataSource::Synthetic(SynthConfig::default()),
                fractions: (0.8, 0.1, 0.1),
                group_by_compound: false,
                mean_impute: false,
            },
        }
    }
}

impl TrainConfig {
    /// Desk-scale benchmark used by the ablation ladder and the
    /// end-to-end tests: a scaled-down model over the default planted
    /// synthetic dataset. Small enough that a full two-stage run takes
    /// seconds; the claims it supports (shape contracts, gradient
    /// checks, ladder ordering) do not depend on model scale.
    pub fn synthetic_benchmark() -> Self {
        TrainConfig {
            seed: 42,
            stage1: Stage1Config {
                epochs: 40,
                batch_size: 32,
                early_stop_accuracy: 0.99,
                patience: 5,
            },
            stage2: Stage2Config {
                epochs: 40,
                batch_size: 32,
                aux_ext_weight: 0.0,
                patience: 10,
            },
            optimizer: OptimizerConfig::default(),
            model: ModelConfig {
                arch: crate::model::Arch::CnnBiLstm,
                embedder: crate::embedder::EmbedderConfig {
                    channels: [6, 8, 12],
                    kernel_width: 5,
                    pool_width: 4,
                    roi_bins: 6,
                },
                hidden: 24,
                threshold: 0.5,
            },
            data: DataConfig {
                source: DataSource::Synthetic(SynthConfig::default()),
                fractions: (0.8, 0.1, 0.1),
                group_by_compound: false,
                mean_impute: false,
            },
        }
    }

    pub fn q(&self) -> usize {
        match &self.data.source {
            DataSource::Csv { labels, .. } => *labels,
            DataSource::Synthetic(s) => s.labels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        self.model.embedder.validate()?;
        if self.stage1.batch_size == 0 || self.stage2.batch_size == 0 {
            return Err(Error::Config("batch sizes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.stage1.early_stop_accuracy) {
            return Err(Error::Config(
                "stage1.early_stop_accuracy must lie in [0,1]".into(),
            ));
        }
        if self.stage2.aux_ext_weight < 0.0 {
            return Err(Error::Config("stage2.aux_ext_weight must be >= 0".into()));
        }
        let (a, b, c) = self.data.fractions;
        if a <= 0.0 || b <= 0.0 || c <= 0.0 || (a + b + c - 1.0).abs() > 1e-9 {
            return Err(Error::BadFractions {
                fractions: [a, b, c],
                reason: "must be positive and sum to 1".into(),
            });
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile {
                path: path.to_path_buf(),
            });
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let cfg: TrainConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Stable 64-bit hash of the canonical JSON form, embedded in
    /// checkpoints to pin them to the producing configuration.
    pub fn hash(&self) -> u64 {
        fnv1a(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

/// FNV-1a over a byte string.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_preserves_hash() {
        let cfg = TrainConfig::synthetic_benchmark();
        let json = cfg.to_json();
        let back: TrainConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn hash_tracks_content() {
        let a = TrainConfig::synthetic_benchmark();
        let mut b = a.clone();
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn validation_catches_bad_fractions() {
        let mut cfg = TrainConfig::synthetic_benchmark();
        cfg.data.fractions = (0.5, 0.5, 0.5);
        assert!(cfg.validate().is_err());
    }
}
