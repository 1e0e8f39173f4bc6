//! Shared per-source CNN embedder.
//!
//! Each raw feature vector, whatever its length, runs through the same
//! conv/relu/pool, conv/relu/pool, conv/relu stack and is finished by a
//! fixed-bin max pool, so every source lands in one embedding space of
//! `channels[2] * roi_bins` reals. One parameter set serves all
//! sources; what makes the embeddings source-specific is the
//! pretraining stage, not separate towers.

use crate::error::{Error, Result};
use crate::tensor::{Tape, Var};

/// Geometry of the conv/pool stack.
///
/// Pooling windows overlap: the stride is half the window (at least 1).
/// With the default geometry the shortest admissible raw vector is 59
/// entries; [`EmbedderConfig::min_raw_len`] gives the exact bound for
/// any configuration.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EmbedderConfig {
    /// Output channels of the three conv layers.
    pub channels: [usize; 3],
    pub kernel_width: usize,
    pub pool_width: usize,
    pub roi_bins: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            channels: [32, 48, 96],
            kernel_width: 8,
            pool_width: 4,
            roi_bins: 32,
        }
    }
}

impl EmbedderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels.iter().any(|&c| c == 0)
            || self.kernel_width == 0
            || self.pool_width == 0
            || self.roi_bins == 0
        {
            return Err(Error::Config(
                "embedder channels, kernel_width, pool_width and roi_bins must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Length of every embedding vector.
    pub fn embedding_dim(&self) -> usize {
        self.channels[2] * self.roi_bins
    }

    pub fn pool_stride(&self) -> usize {
        (self.pool_width / 2).max(1)
    }

    /// Sequence length after the full stack, or `None` when `len` is
    /// too short for some layer.
    pub fn stack_output_len(&self, len: usize) -> Option<usize> {
        let conv = |l: usize| l.checked_sub(self.kernel_width).map(|d| d + 1);
        let pool = |l: usize| {
            (l >= self.pool_width).then(|| (l - self.pool_width) / self.pool_stride() + 1)
        };
        let l = conv(len)?;
        let l = pool(l)?;
        let l = conv(l)?;
        let l = pool(l)?;
        conv(l)
    }

    /// Smallest raw length the stack admits, from inverting the shape
    /// algebra layer by layer.
    pub fn min_raw_len(&self) -> usize {
        let unconv = |t: usize| t + self.kernel_width - 1;
        let unpool = |t: usize| self.pool_width + (t - 1) * self.pool_stride();
        unconv(unpool(unconv(unpool(unconv(1)))))
    }

    /// Checks one source length against the shape algebra.
    pub fn check_raw_len(&self, name: &str, len: usize) -> Result<()> {
        if self.stack_output_len(len).is_none() {
            return Err(Error::RawTooShort {
                name: name.to_string(),
                len,
                min: self.min_raw_len(),
            });
        }
        Ok(())
    }
}

/// Conv parameters bound onto a tape: `(kernels, bias)` per layer.
pub type ConvVars = [(Var, Var); 3];

/// Embeds one standardized raw vector (bound as a 1-D var of length L)
/// into a vector of exactly `cfg.embedding_dim()` reals.
pub fn embed_source(tape: &mut Tape, raw: Var, conv: &ConvVars, cfg: &EmbedderConfig) -> Result<Var> {
    let len = match tape.shape(raw) {
        [l] => *l,
        s => {
            return Err(Error::InvalidShape {
                op: "embed_source",
                shape: s.to_vec(),
                reason: "raw input must be a 1-D vector".into(),
            })
        }
    };
    let mut x = tape.reshape(raw, vec![1, len])?;
    for (layer, &(w, b)) in conv.iter().enumerate() {
        let y = tape.conv1d(x, w, b)?;
        x = tape.relu(y);
        if layer < 2 {
            x = tape.max_pool1d(x, cfg.pool_width, cfg.pool_stride())?;
        }
    }
    let pooled = tape.roi_pool1d(x, cfg.roi_bins)?;
    tape.reshape(pooled, vec![cfg.embedding_dim()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::tensor::{grad_check, Tensor};

    /// Small geometry so tests stay fast.
    fn small_cfg() -> EmbedderConfig {
        EmbedderConfig {
            channels: [2, 3, 4],
            kernel_width: 3,
            pool_width: 2,
            roi_bins: 4,
        }
    }

    fn conv_kernel_shapes(cfg: &EmbedderConfig) -> Vec<Vec<usize>> {
        let [c0, c1, c2] = cfg.channels;
        let w = cfg.kernel_width;
        vec![vec![c0, 1, w], vec![c1, c0, w], vec![c2, c1, w]]
    }

    fn bind_random(tape: &mut Tape, cfg: &EmbedderConfig, rng: &mut Rng) -> ConvVars {
        let [c0, c1, c2] = cfg.channels;
        let w = cfg.kernel_width;
        let mut mk = |shape: Vec<usize>| {
            let n: usize = shape.iter().product();
            let data: Vec<f64> = (0..n).map(|_| rng.uniform(-0.5, 0.5)).collect();
            tape.constant(Tensor::new(shape, data).unwrap())
        };
        [
            (mk(vec![c0, 1, w]), mk(vec![c0])),
            (mk(vec![c1, c0, w]), mk(vec![c1])),
            (mk(vec![c2, c1, w]), mk(vec![c2])),
        ]
    }

    #[test]
    fn default_geometry_admits_both_paper_lengths() {
        let cfg = EmbedderConfig::default();
        assert_eq!(cfg.min_raw_len(), 59);
        assert!(cfg.stack_output_len(80).is_some());
        assert!(cfg.stack_output_len(12328).is_some());
        assert!(cfg.stack_output_len(58).is_none());
        assert!(cfg.check_raw_len("short", 12).is_err());
    }

    #[test]
    fn embedding_length_is_constant_across_raw_lengths() {
        let cfg = small_cfg();
        let mut rng = Rng::new(3);
        let mut lens = Vec::new();
        for raw_len in [cfg.min_raw_len(), 20, 33, 64, 200] {
            let mut tape = Tape::new();
            let conv = bind_random(&mut tape, &cfg, &mut rng);
            let data: Vec<f64> = (0..raw_len).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let raw = tape.constant(Tensor::vector(data));
            let e = embed_source(&mut tape, raw, &conv, &cfg).unwrap();
            lens.push(tape.shape(e).to_vec());
        }
        assert!(lens.iter().all(|l| l == &vec![cfg.embedding_dim()]));
    }

    #[test]
    fn default_config_embeds_80_and_12328_identically_sized() {
        // Zero weights keep this cheap at full default geometry.
        let cfg = EmbedderConfig::default();
        for raw_len in [80usize, 12328] {
            let mut tape = Tape::new();
            let [c0, c1, c2] = cfg.channels;
            let w = cfg.kernel_width;
            let mut zeros = |shape: Vec<usize>| {
                tape.constant(Tensor::zeros(shape))
            };
            let conv = [
                (zeros(vec![c0, 1, w]), zeros(vec![c0])),
                (zeros(vec![c1, c0, w]), zeros(vec![c1])),
                (zeros(vec![c2, c1, w]), zeros(vec![c2])),
            ];
            let raw = tape.constant(Tensor::vector(vec![0.25; raw_len]));
            let e = embed_source(&mut tape, raw, &conv, &cfg).unwrap();
            assert_eq!(tape.shape(e), &[cfg.embedding_dim()]);
        }
    }

    #[test]
    fn zero_input_zero_biases_give_zero_embedding() {
        let cfg = small_cfg();
        let mut tape = Tape::new();
        let [c0, c1, c2] = cfg.channels;
        let w = cfg.kernel_width;
        let mut rng = Rng::new(5);
        // Random kernels, zero biases, zero input.
        let mut mk = |tape: &mut Tape, shape: Vec<usize>| {
            let n: usize = shape.iter().product();
            let data: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            tape.constant(Tensor::new(shape, data).unwrap())
        };
        let k0 = mk(&mut tape, vec![c0, 1, w]);
        let k1 = mk(&mut tape, vec![c1, c0, w]);
        let k2 = mk(&mut tape, vec![c2, c1, w]);
        let conv = [
            (k0, tape.constant(Tensor::zeros(vec![c0]))),
            (k1, tape.constant(Tensor::zeros(vec![c1]))),
            (k2, tape.constant(Tensor::zeros(vec![c2]))),
        ];
        let raw = tape.constant(Tensor::vector(vec![0.0; 24]));
        let e = embed_source(&mut tape, raw, &conv, &cfg).unwrap();
        assert!(tape.data(e).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn embedding_is_pure() {
        let cfg = small_cfg();
        let mut rng = Rng::new(7);
        let data: Vec<f64> = (0..30).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let once = |seed: u64, data: &[f64]| -> Vec<f64> {
            let mut tape = Tape::new();
            let mut rng = Rng::new(seed);
            let conv = bind_random(&mut tape, &cfg, &mut rng);
            let raw = tape.constant(Tensor::vector(data.to_vec()));
            let e = embed_source(&mut tape, raw, &conv, &cfg).unwrap();
            tape.data(e).to_vec()
        };
        assert_eq!(once(11, &data), once(11, &data));
    }

    #[test]
    fn full_stack_gradient_matches_finite_differences() {
        let cfg = small_cfg();
        let raw_len = 22;
        let n_conv: usize = conv_kernel_shapes(&cfg)
            .iter()
            .map(|s| s.iter().product::<usize>() + s[0])
            .sum();
        let mut rng = Rng::new(13);
        let point = Tensor::vector(
            (0..n_conv + raw_len).map(|_| rng.uniform(-0.7, 0.7)).collect(),
        );
        let err = grad_check(
            |tape, flat| {
                let mut off = 0;
                let mut take = |tape: &mut Tape, shape: Vec<usize>| -> crate::Result<Var> {
                    let n: usize = shape.iter().product();
                    let s = tape.slice(flat, off, off + n)?;
                    off += n;
                    tape.reshape(s, shape)
                };
                let cfg = small_cfg();
                let [c0, c1, c2] = cfg.channels;
                let w = cfg.kernel_width;
                let conv = [
                    (take(tape, vec![c0, 1, w])?, take(tape, vec![c0])?),
                    (take(tape, vec![c1, c0, w])?, take(tape, vec![c1])?),
                    (take(tape, vec![c2, c1, w])?, take(tape, vec![c2])?),
                ];
                let raw = take(tape, vec![raw_len])?;
                let e = embed_source(tape, raw, &conv, &cfg)?;
                Ok(tape.sum(e))
            },
            &point,
            1e-3,
        )
        .unwrap();
        assert!(err < 1e-4, "embedder stack grad err {err}");
    }
}
