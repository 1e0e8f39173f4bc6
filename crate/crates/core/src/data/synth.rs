//! Synthetic datasets with planted cross-domain structure.
//!
//! Labels are the latent cause of every source: a record draws a
//! binary latent `z` (1-3 active labels), each source observes a fixed
//! random map of `z` plus a source signature and noise. A shared
//! per-record latent, scaled by `dependency`, is mixed into every map
//! input, so sources are conditionally independent given `z` exactly
//! when `dependency = 0`.

use super::{CompoundRecord, Dataset, DomainSpec, LabelVector};
use crate::error::{Error, Result};
use crate::rng::Rng;
use std::collections::BTreeMap;

/// Width of the hidden layer in each source map.
const MAP_HIDDEN: usize = 16;
/// Length of the shared cross-source latent.
const SHARED_DIM: usize = 4;
/// Extra gain on the shared-latent columns of each map. The shared
/// latent then shifts units across their responsive band per record,
/// so the label signal reaches different units in different records —
/// a context a per-feature linear readout cannot resolve.
const SHARED_GAIN: f64 = 4.0;
/// Fraction of hidden units drawn as sign-symmetric pairs: opposite
/// label columns, shared context columns, one output atom. The pair
/// sum `tanh(a+b) + tanh(-a+b)` carries the label part `a` only
/// through even functions, so its linear-in-feature component cancels
/// identically; the remaining unpaired units are what a linear readout
/// can still see.
const PAIRED_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    /// Number of feature sources.
    pub domains: usize,
    /// Raw vector length per source; must have `domains` entries.
    pub dims: Vec<usize>,
    /// Number of label classes.
    pub labels: usize,
    /// Number of records.
    pub samples: usize,
    /// In [0,1]: scale of the shared latent mixed into every source.
    pub dependency: f64,
    /// Scale of the per-source signature offset.
    pub signature_amplitude: f64,
    /// Standard deviation of additive observation noise.
    pub noise_std: f64,
    /// Replace the tanh maps with linear ones (labels become linearly
    /// recoverable; used to sanity-check the linear baseline).
    pub linear_map: bool,
    /// Gain on the map pre-activations. Small values leave the tanh
    /// units quasi-linear (labels nearly linearly decodable); large
    /// values make them switch-like, so label recovery needs the
    /// nonlinear models.
    pub map_gain: f64,
    /// Align sources: one atom layout (in proportional coordinates)
    /// shared by all sources, with each source's label wiring a
    /// systematic rotation of the same scheme. An atom pattern then
    /// means different labels in different sources, so reading a
    /// record requires knowing which source each profile came from.
    pub aligned_sources: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            domains: 3,
            dims: vec![48, 56, 64],
            labels: 14,
            samples: 600,
            dependency: 0.8,
            signature_amplitude: 1.0,
            noise_std: 0.05,
            linear_map: false,
            map_gain: 2.5,
            aligned_sources: false,
            seed: 42,
        }
    }
}

/// One output atom in dim-independent coordinates.
#[derive(Clone, Copy)]
struct AtomSpec {
    center_frac: f64,
    width_frac: f64,
    amp: f64,
}

fn draw_layout(n_slots: usize, rng: &mut Rng) -> Vec<AtomSpec> {
    (0..n_slots)
        .map(|slot| AtomSpec {
            center_frac: (slot as f64 + 0.5 + rng.uniform(-0.2, 0.2)) / n_slots as f64,
            width_frac: 0.5 / n_slots as f64 * rng.uniform(0.8, 1.2),
            amp: rng.uniform(0.7, 1.3) * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 },
        })
        .collect()
}

struct SourceMap {
    /// [MAP_HIDDEN x (labels + SHARED_DIM)]
    hidden_w: Vec<f64>,
    /// [dim x MAP_HIDDEN]
    out_w: Vec<f64>,
    /// [dim]
    signature: Vec<f64>,
}

impl SourceMap {
    fn draw(
        dim: usize,
        q: usize,
        amplitude: f64,
        gain: f64,
        allowed: &[bool],
        layout: &[AtomSpec],
        rotation: Option<usize>,
        rng: &mut Rng,
    ) -> Self {
        let in_dim = q + SHARED_DIM;
        let n_pairs = ((MAP_HIDDEN as f64 * PAIRED_FRACTION) as usize) / 2;
        let covered: Vec<usize> = (0..q).filter(|&l| allowed[l]).collect();

        // Hidden rows: the first 2*n_pairs units come in sign-symmetric
        // pairs (label columns negated, context columns shared), the
        // rest are independent draws. Pairs ride a saturated context
        // carrier (their sum becomes a random sign times an even
        // label code); unpaired units keep a mild context term and stay
        // quasi-linear in the labels.
        let mut hidden_w = vec![0.0; MAP_HIDDEN * in_dim];
        let draw_row = |rng: &mut Rng, context_scale: f64| -> Vec<f64> {
            (0..in_dim)
                .map(|col| {
                    if col < q && !allowed[col] {
                        return 0.0;
                    }
                    let scale = if col < q { gain } else { gain * context_scale };
                    rng.normal() * scale
                })
                .collect()
        };
        // A pair listens to a small random set of labels with weights
        // deep in tanh saturation: any active touching label collapses
        // the pair sum towards zero, so the pair's atom encodes label
        // presence as a near-binary on/off, carried under a random
        // per-record sign.
        for p in 0..n_pairs {
            let row = draw_row(rng, SHARED_GAIN);
            // Aligned mode wires slot p of source j to labels
            // (2p+j, 2p+j+q/2) mod q: the same silent atom implicates
            // different labels in different sources, and a label's
            // within-source alias partner changes across sources.
            let listened: Vec<usize> = match rotation {
                Some(j) => {
                    let a = (2 * p + j) % q;
                    let b = (2 * p + j + q.div_ceil(2)) % q;
                    if a == b { vec![a] } else { vec![a, b] }
                }
                None => {
                    let touched = (2 + rng.below(2)).min(covered.len());
                    let mut pool = covered.clone();
                    for pick in 0..touched {
                        let jj = pick + rng.below(pool.len() - pick);
                        pool.swap(pick, jj);
                    }
                    pool[..touched].to_vec()
                }
            };
            for (col, &v) in row.iter().enumerate() {
                let v = if col < q {
                    if listened.contains(&col) {
                        3.0 * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 }
                    } else {
                        0.0
                    }
                } else {
                    v
                };
                hidden_w[(2 * p) * in_dim + col] = v;
                hidden_w[(2 * p + 1) * in_dim + col] = if col < q { -v } else { v };
            }
        }
        for h in 2 * n_pairs..MAP_HIDDEN {
            let row = draw_row(rng, 1.0);
            hidden_w[h * in_dim..(h + 1) * in_dim].copy_from_slice(&row);
        }

        // Each unit writes one localized bump on the feature axis, the
        // kind of structure measured profiles carry; a pair shares its
        // bump, so the pair sum is what the features record. Unit
        // amplitudes are directly readable by a sliding local filter;
        // locality is invisible to a per-feature linear readout.
        let mut out_w = vec![0.0; dim * MAP_HIDDEN];
        let write_atom = |out_w: &mut Vec<f64>, h: usize, atom: &AtomSpec| {
            let center = atom.center_frac * dim as f64;
            let width = atom.width_frac * dim as f64;
            for d in 0..dim {
                let dist = (d as f64 - center) / width;
                out_w[d * MAP_HIDDEN + h] = atom.amp * (-0.5 * dist * dist).exp();
            }
            let norm: f64 = (0..dim)
                .map(|d| out_w[d * MAP_HIDDEN + h].powi(2))
                .sum::<f64>()
                .sqrt()
                .max(1e-12);
            let target = (dim as f64).sqrt() / 4.0;
            for d in 0..dim {
                out_w[d * MAP_HIDDEN + h] *= target / norm;
            }
        };
        for p in 0..n_pairs {
            write_atom(&mut out_w, 2 * p, &layout[p]);
            for d in 0..dim {
                out_w[d * MAP_HIDDEN + 2 * p + 1] = out_w[d * MAP_HIDDEN + 2 * p];
            }
        }
        for h in 2 * n_pairs..MAP_HIDDEN {
            write_atom(&mut out_w, h, &layout[n_pairs + (h - 2 * n_pairs)]);
        }

        let signature: Vec<f64> = (0..dim).map(|_| rng.normal() * amplitude).collect();
        SourceMap {
            hidden_w,
            out_w,
            signature,
        }
    }

    fn apply(&self, latent: &[f64], dim: usize, linear: bool) -> Vec<f64> {
        let in_dim = latent.len();
        let mut hidden = vec![0.0; MAP_HIDDEN];
        for (h, hv) in hidden.iter_mut().enumerate() {
            let row = &self.hidden_w[h * in_dim..(h + 1) * in_dim];
            let pre: f64 = row.iter().zip(latent).map(|(w, x)| w * x).sum();
            *hv = if linear { pre } else { pre.tanh() };
        }
        (0..dim)
            .map(|d| {
                let row = &self.out_w[d * MAP_HIDDEN..(d + 1) * MAP_HIDDEN];
                let v: f64 = row.iter().zip(&hidden).map(|(w, x)| w * x).sum();
                v + self.signature[d]
            })
            .collect()
    }
}

/// Generates a dataset per the planted model. Bit-for-bit reproducible
/// for a fixed config. For `samples >= 200` every label class is
/// guaranteed to appear at least once; if a draw misses a class the
/// generator deterministically retries with `seed+1`.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.dims.len() != cfg.domains {
        return Err(Error::Config(format!(
            "dims has {} entries for {} domains",
            cfg.dims.len(),
            cfg.domains
        )));
    }
    if cfg.samples == 0 || cfg.labels == 0 || cfg.domains == 0 {
        return Err(Error::Config(
            "domains, labels and samples must all be positive".into(),
        ));
    }
    if !(0.0..=1.0).contains(&cfg.dependency) {
        return Err(Error::Config(format!(
            "dependency {} outside [0,1]",
            cfg.dependency
        )));
    }

    let mut seed = cfg.seed;
    loop {
        let ds = generate_once(cfg, seed)?;
        if cfg.samples < 200 || all_classes_present(&ds, cfg.labels) {
            return Ok(ds);
        }
        seed += 1;
    }
}

fn all_classes_present(ds: &Dataset, q: usize) -> bool {
    let mut seen = vec![false; q];
    for rec in &ds.records {
        if let Some(label) = &rec.label {
            for i in label.ones() {
                seen[i] = true;
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn generate_once(cfg: &SynthConfig, seed: u64) -> Result<Dataset> {
    let mut structure = Rng::substream(seed, "synth-structure");
    let n_pairs = ((MAP_HIDDEN as f64 * PAIRED_FRACTION) as usize) / 2;
    let n_slots = MAP_HIDDEN - n_pairs;
    let mut layout_rng = Rng::substream(seed, "synth-layout");
    let shared = draw_layout(n_slots, &mut layout_rng);
    let k = cfg.domains;
    // Label coverage is complementary: with k sources each label is
    // invisible to exactly one (its index modulo k), so no single
    // source suffices and the embedder must serve all of them.
    let maps: Vec<SourceMap> = cfg
        .dims
        .iter()
        .enumerate()
        .map(|(j, &dim)| {
            let allowed: Vec<bool> = (0..cfg.labels)
                .map(|l| cfg.aligned_sources || k == 1 || l % k != j)
                .collect();
            let own_layout;
            let layout: &[AtomSpec] = if cfg.aligned_sources {
                &shared
            } else {
                own_layout = draw_layout(n_slots, &mut layout_rng);
                &own_layout
            };
            SourceMap::draw(
                dim,
                cfg.labels,
                cfg.signature_amplitude,
                cfg.map_gain,
                &allowed,
                layout,
                cfg.aligned_sources.then_some(j),
                &mut structure,
            )
        })
        .collect();

    let specs: Vec<DomainSpec> = cfg
        .dims
        .iter()
        .enumerate()
        .map(|(id, &dim)| DomainSpec {
            id,
            name: format!("synth{id}"),
            dim,
        })
        .collect();

    let mut draw = Rng::substream(seed, "synth-records");
    let mut records = Vec::with_capacity(cfg.samples);
    let width = (cfg.samples as f64).log10().ceil().max(1.0) as usize;
    for i in 0..cfg.samples {
        // 1-3 distinct active labels.
        let n_active = 1 + draw.below(3.min(cfg.labels));
        let mut pool: Vec<usize> = (0..cfg.labels).collect();
        for pick in 0..n_active {
            let j = pick + draw.below(pool.len() - pick);
            pool.swap(pick, j);
        }
        let label = LabelVector::from_indices(cfg.labels, &pool[..n_active]);

        let mut latent: Vec<f64> = label.as_f64();
        for _ in 0..SHARED_DIM {
            latent.push(cfg.dependency * draw.normal());
        }

        let mut features = BTreeMap::new();
        for (spec, map) in specs.iter().zip(&maps) {
            let mut v = map.apply(&latent, spec.dim, cfg.linear_map);
            for x in &mut v {
                *x += cfg.noise_std * draw.normal();
            }
            features.insert(spec.id, v);
        }

        records.push(CompoundRecord {
            id: format!("s{i:0width$}"),
            features,
            label: Some(label),
        });
    }

    Ok(Dataset { specs, records })
}
