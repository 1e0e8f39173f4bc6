//! Model assembly: parameter registry, architecture variants and the
//! forward pass from a raw record to per-label logits.
//!
//! Parameters live in one flat `f64` buffer split into named blocks
//! with a fixed order, which keeps the optimizer, the gradient
//! gathering and the checkpoint format trivially deterministic. Every
//! training step binds the blocks onto a fresh tape as leaf variables;
//! gradient checks instead bind them as slices of a single flat
//! variable.

use crate::data::{CompoundRecord, DomainSpec, Standardizer};
use crate::embedder::{embed_source, ConvVars, EmbedderConfig};
use crate::error::{Error, Result};
use crate::predictor::encode_sequence;
use crate::rng::Rng;
use crate::tensor::{LstmCellVars, Tape, Tensor, Var};

/// Which ladder rung this model is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    /// Per-label logistic regression on the concatenated raw features.
    Linear,
    /// Shared CNN embedder, embeddings concatenated into the heads.
    Cnn,
    /// Shared CNN embedder, Bi-LSTM over the embedding sequence.
    CnnBiLstm,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    pub embedder: EmbedderConfig,
    /// LSTM hidden width H; the sequence readout is 2H.
    pub hidden: usize,
    /// Sigmoid threshold turning logits into predicted label sets.
    pub threshold: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            arch: Arch::CnnBiLstm,
            embedder: EmbedderConfig::default(),
            hidden: 64,
            threshold: 0.5,
        }
    }
}

/// One named parameter block in the flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

enum Init {
    Zeros,
    /// Uniform in +-sqrt(6 / (fan_in + fan_out)).
    Glorot { fan_in: usize, fan_out: usize },
}

struct BlockDef {
    name: &'static str,
    shape: Vec<usize>,
    init: Init,
}

/// Named, ordered, flat parameter storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    blocks: Vec<Block>,
    data: Vec<f64>,
}

impl ParamSet {
    fn build(defs: Vec<BlockDef>, rng: &mut Rng) -> Self {
        let mut blocks = Vec::with_capacity(defs.len());
        let mut data = Vec::new();
        for def in defs {
            let len: usize = def.shape.iter().product();
            blocks.push(Block {
                name: def.name.to_string(),
                shape: def.shape,
                offset: data.len(),
            });
            match def.init {
                Init::Zeros => data.extend(std::iter::repeat_n(0.0, len)),
                Init::Glorot { fan_in, fan_out } => {
                    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    data.extend((0..len).map(|_| rng.uniform(-bound, bound)));
                }
            }
        }
        ParamSet { blocks, data }
    }

    pub fn from_parts(blocks: Vec<Block>, data: Vec<f64>) -> Result<Self> {
        let total: usize = blocks.iter().map(Block::len).sum();
        if total != data.len() {
            return Err(Error::Checkpoint(format!(
                "parameter blocks cover {total} values, data holds {}",
                data.len()
            )));
        }
        Ok(ParamSet { blocks, data })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block_slice(&self, name: &str) -> Option<&[f64]> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .map(|b| &self.data[b.offset..b.offset + b.len()])
    }

    /// Binds every block as a gradient-tracked leaf, in block order.
    pub fn bind_leaves(&self, tape: &mut Tape) -> Vec<Var> {
        self.blocks
            .iter()
            .map(|b| {
                let t = Tensor::new(
                    b.shape.clone(),
                    self.data[b.offset..b.offset + b.len()].to_vec(),
                )
                .expect("block shapes are consistent by construction");
                tape.param(t)
            })
            .collect()
    }

    /// Binds every block as a slice of one flat variable (the form the
    /// gradient checker wants).
    pub fn bind_flat(&self, tape: &mut Tape, flat: Var) -> Result<Vec<Var>> {
        let mut vars = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let s = tape.slice(flat, b.offset, b.offset + b.len())?;
            vars.push(tape.reshape(s, b.shape.clone())?);
        }
        Ok(vars)
    }

    /// Reads the gradients of leaf-bound blocks back into flat order.
    /// Blocks untouched by the loss contribute zeros.
    pub fn gather_grads(&self, tape: &Tape, vars: &[Var]) -> Vec<f64> {
        let mut flat = vec![0.0; self.data.len()];
        for (b, &v) in self.blocks.iter().zip(vars) {
            if let Some(g) = tape.grad(v) {
                flat[b.offset..b.offset + b.len()].copy_from_slice(g);
            }
        }
        flat
    }
}

/// Parameter blocks bound onto a tape, resolved by role.
pub struct ModelVars {
    /// Every block in registry order (for gradient gathering).
    pub all: Vec<Var>,
    pub conv: Option<ConvVars>,
    /// Source-type classifier (W, b).
    pub extractor: Option<(Var, Var)>,
    pub fwd: Option<LstmCellVars>,
    pub bwd: Option<LstmCellVars>,
    /// Per-label binary heads (W, b).
    pub heads: (Var, Var),
}

/// A built model: configuration, sources, standardization statistics
/// and parameters.
#[derive(Debug, Clone)]
pub struct Model {
    pub cfg: ModelConfig,
    pub specs: Vec<DomainSpec>,
    pub q: usize,
    pub standardizer: Standardizer,
    pub params: ParamSet,
}

impl Model {
    /// Builds and initializes a model, validating the shape algebra of
    /// every source against the embedder geometry up front.
    pub fn new(cfg: ModelConfig, specs: Vec<DomainSpec>, q: usize, seed: u64) -> Result<Self> {
        crate::data::validate_specs(&specs)?;
        if q == 0 {
            return Err(Error::Config("q must be positive".into()));
        }
        if !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
            return Err(Error::BadThreshold(cfg.threshold));
        }
        if cfg.hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        cfg.embedder.validate()?;
        if cfg.arch != Arch::Linear {
            for s in &specs {
                cfg.embedder.check_raw_len(&s.name, s.dim)?;
            }
        }
        let defs = block_defs(&cfg, &specs, q);
        let mut rng = Rng::substream(seed, "init");
        let params = ParamSet::build(defs, &mut rng);
        let standardizer = Standardizer::identity(&specs);
        Ok(Model {
            cfg,
            specs,
            q,
            standardizer,
            params,
        })
    }

    pub fn k(&self) -> usize {
        self.specs.len()
    }

    /// Input width of the label heads under this architecture.
    pub fn heads_in_dim(&self) -> usize {
        match self.cfg.arch {
            Arch::Linear => self.specs.iter().map(|s| s.dim).sum(),
            Arch::Cnn => self.k() * self.cfg.embedder.embedding_dim(),
            Arch::CnnBiLstm => 2 * self.cfg.hidden,
        }
    }

    /// Binds the parameter blocks as gradient-tracked leaves.
    pub fn bind(&self, tape: &mut Tape) -> ModelVars {
        let vars = self.params.bind_leaves(tape);
        self.resolve(vars)
    }

    /// Binds the parameter blocks as slices of one flat variable.
    pub fn bind_flat(&self, tape: &mut Tape, flat: Var) -> Result<ModelVars> {
        let vars = self.params.bind_flat(tape, flat)?;
        Ok(self.resolve(vars))
    }

    fn resolve(&self, vars: Vec<Var>) -> ModelVars {
        match self.cfg.arch {
            Arch::Linear => ModelVars {
                heads: (vars[0], vars[1]),
                conv: None,
                extractor: None,
                fwd: None,
                bwd: None,
                all: vars,
            },
            Arch::Cnn => ModelVars {
                conv: Some([(vars[0], vars[1]), (vars[2], vars[3]), (vars[4], vars[5])]),
                extractor: Some((vars[6], vars[7])),
                fwd: None,
                bwd: None,
                heads: (vars[8], vars[9]),
                all: vars,
            },
            Arch::CnnBiLstm => ModelVars {
                conv: Some([(vars[0], vars[1]), (vars[2], vars[3]), (vars[4], vars[5])]),
                extractor: Some((vars[6], vars[7])),
                fwd: Some(LstmCellVars {
                    w_x: vars[8],
                    w_h: vars[9],
                    b: vars[10],
                }),
                bwd: Some(LstmCellVars {
                    w_x: vars[11],
                    w_h: vars[12],
                    b: vars[13],
                }),
                heads: (vars[14], vars[15]),
                all: vars,
            },
        }
    }

    /// Standardizes and binds one source vector of a record.
    fn bind_raw(&self, tape: &mut Tape, rec: &CompoundRecord, spec: &DomainSpec) -> Result<Var> {
        let raw = rec.features.get(&spec.id).ok_or_else(|| Error::MissingSource {
            id: rec.id.clone(),
            name: spec.name.clone(),
        })?;
        if raw.len() != spec.dim {
            return Err(Error::Config(format!(
                "record '{}' source '{}' has length {}, expected {}",
                rec.id,
                spec.name,
                raw.len(),
                spec.dim
            )));
        }
        let std = self.standardizer.transform(spec.id, raw);
        Ok(tape.constant(Tensor::vector(std)))
    }

    /// Embeds every source of a record, in `DomainSpec::id` order.
    pub fn embed_record(
        &self,
        tape: &mut Tape,
        vars: &ModelVars,
        rec: &CompoundRecord,
    ) -> Result<Vec<Var>> {
        let conv = vars
            .conv
            .as_ref()
            .ok_or_else(|| Error::Config("architecture has no embedder".into()))?;
        let mut out = Vec::with_capacity(self.k());
        for spec in &self.specs {
            let raw = self.bind_raw(tape, rec, spec)?;
            out.push(embed_source(tape, raw, conv, &self.cfg.embedder)?);
        }
        Ok(out)
    }

    /// Logits from already-computed source embeddings (CNN archs), so
    /// callers can reuse the embeddings for auxiliary losses.
    pub fn scores_from_embeddings(
        &self,
        tape: &mut Tape,
        vars: &ModelVars,
        embeddings: &[Var],
    ) -> Result<Var> {
        let features = match self.cfg.arch {
            Arch::Linear => {
                return Err(Error::Config(
                    "linear architecture has no embeddings".into(),
                ))
            }
            Arch::Cnn => tape.concat(embeddings)?,
            Arch::CnnBiLstm => {
                let fwd = vars.fwd.as_ref().expect("bilstm arch binds fwd cell");
                let bwd = vars.bwd.as_ref().expect("bilstm arch binds bwd cell");
                encode_sequence(tape, embeddings, fwd, bwd, self.cfg.hidden)?
            }
        };
        let (w, b) = vars.heads;
        let affine = tape.matmul(features, w)?;
        tape.add(affine, b)
    }

    /// Full forward pass to raw per-label logits.
    pub fn scores(&self, tape: &mut Tape, vars: &ModelVars, rec: &CompoundRecord) -> Result<Var> {
        if self.cfg.arch == Arch::Linear {
            let raws: Vec<Var> = self
                .specs
                .iter()
                .map(|spec| self.bind_raw(tape, rec, spec))
                .collect::<Result<_>>()?;
            let features = tape.concat(&raws)?;
            let (w, b) = vars.heads;
            let affine = tape.matmul(features, w)?;
            return tape.add(affine, b);
        }
        let embeddings = self.embed_record(tape, vars, rec)?;
        self.scores_from_embeddings(tape, vars, &embeddings)
    }
}

fn block_defs(cfg: &ModelConfig, specs: &[DomainSpec], q: usize) -> Vec<BlockDef> {
    let mut defs = Vec::new();
    let k = specs.len();
    let e_dim = cfg.embedder.embedding_dim();
    let kw = cfg.embedder.kernel_width;
    let [c0, c1, c2] = cfg.embedder.channels;

    if cfg.arch != Arch::Linear {
        let conv_layers = [
            ("embed.conv0.w", "embed.conv0.b", 1, c0),
            ("embed.conv1.w", "embed.conv1.b", c0, c1),
            ("embed.conv2.w", "embed.conv2.b", c1, c2),
        ];
        for (wn, bn, c_in, c_out) in conv_layers {
            defs.push(BlockDef {
                name: wn,
                shape: vec![c_out, c_in, kw],
                init: Init::Glorot {
                    fan_in: c_in * kw,
                    fan_out: c_out * kw,
                },
            });
            defs.push(BlockDef {
                name: bn,
                shape: vec![c_out],
                init: Init::Zeros,
            });
        }
        defs.push(BlockDef {
            name: "extractor.w",
            shape: vec![e_dim, k],
            init: Init::Glorot {
                fan_in: e_dim,
                fan_out: k,
            },
        });
        defs.push(BlockDef {
            name: "extractor.b",
            shape: vec![k],
            init: Init::Zeros,
        });
    }

    if cfg.arch == Arch::CnnBiLstm {
        let h = cfg.hidden;
        let cells = [
            ("seq.fwd.w_x", "seq.fwd.w_h", "seq.fwd.b"),
            ("seq.bwd.w_x", "seq.bwd.w_h", "seq.bwd.b"),
        ];
        for (wx, wh, b) in cells {
            defs.push(BlockDef {
                name: wx,
                shape: vec![4 * h, e_dim],
                init: Init::Glorot {
                    fan_in: e_dim,
                    fan_out: 4 * h,
                },
            });
            defs.push(BlockDef {
                name: wh,
                shape: vec![4 * h, h],
                init: Init::Glorot {
                    fan_in: h,
                    fan_out: 4 * h,
                },
            });
            defs.push(BlockDef {
                name: b,
                shape: vec![4 * h],
                init: Init::Zeros,
            });
        }
    }

    let heads_in = match cfg.arch {
        Arch::Linear => specs.iter().map(|s| s.dim).sum(),
        Arch::Cnn => k * e_dim,
        Arch::CnnBiLstm => 2 * cfg.hidden,
    };
    defs.push(BlockDef {
        name: "heads.w",
        shape: vec![heads_in, q],
        init: Init::Glorot {
            fan_in: heads_in,
            fan_out: q,
        },
    });
    defs.push(BlockDef {
        name: "heads.b",
        shape: vec![q],
        init: Init::Zeros,
    });
    defs
}
