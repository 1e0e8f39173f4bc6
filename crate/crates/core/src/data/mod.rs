//! Dataset schema, assembly, splitting and standardization.
//!
//! A sample ([`CompoundRecord`]) carries one raw feature vector per
//! declared source ([`DomainSpec`]) plus an optional binary
//! [`LabelVector`]. Sources live in separate CSV files keyed by sample
//! id; [`assemble_dataset`] joins them, optionally replicating the
//! slow-moving sources across the many samples of one designated
//! source (expression profiles measured at several doses share one
//! fingerprint).

mod csv;
mod synth;

pub use csv::{load_domain_csv, load_labels_csv, write_dataset_csvs, write_labels_csv};
pub use synth::{synth_generate, SynthConfig};

use crate::error::{Error, Result};
use crate::rng::Rng;
use std::collections::BTreeMap;

/// One feature source: a stable integer id, a human-readable name and
/// the raw vector length.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DomainSpec {
    pub id: usize,
    pub name: String,
    pub dim: usize,
}

/// Validates that ids are exactly `0..k-1`, unique, with positive dims.
pub fn validate_specs(specs: &[DomainSpec]) -> Result<()> {
    let mut seen = vec![false; specs.len()];
    for s in specs {
        if s.id >= specs.len() || seen[s.id] {
            return Err(Error::Config(format!(
                "domain ids must be unique and cover 0..{}, got id {} ('{}')",
                specs.len(),
                s.id,
                s.name
            )));
        }
        if s.dim == 0 {
            return Err(Error::Config(format!("domain '{}' has dim 0", s.name)));
        }
        seen[s.id] = true;
    }
    Ok(())
}

/// Binary label vector of length `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    bits: Vec<bool>,
}

impl LabelVector {
    pub fn new(bits: Vec<bool>) -> Self {
        LabelVector { bits }
    }

    pub fn from_indices(q: usize, ones: &[usize]) -> Self {
        let mut bits = vec![false; q];
        for &i in ones {
            bits[i] = true;
        }
        LabelVector { bits }
    }

    pub fn q(&self) -> usize {
        self.bits.len()
    }

    pub fn is_set(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
    }

    /// 0/1 view, the layout used by the loss and the label CSVs.
    pub fn as_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Display names for the label columns: the 14 first-level ATC letters
/// when `q == 14`, generic `l0..` otherwise.
pub fn label_names(q: usize) -> Vec<String> {
    const ATC: [&str; 14] = [
        "A", "B", "C", "D", "G", "H", "J", "L", "M", "N", "P", "R", "S", "V",
    ];
    if q == 14 {
        ATC.iter().map(|s| s.to_string()).collect()
    } else {
        (0..q).map(|i| format!("l{i}")).collect()
    }
}

/// One sample: per-source raw vectors plus an optional label.
#[derive(Debug, Clone)]
pub struct CompoundRecord {
    pub id: String,
    /// Keyed by `DomainSpec::id`.
    pub features: BTreeMap<usize, Vec<f64>>,
    pub label: Option<LabelVector>,
}

impl CompoundRecord {
    /// The compound this sample belongs to: the id up to the last ':'
    /// (replicated samples are keyed `compound:index`).
    pub fn compound(&self) -> &str {
        match self.id.rfind(':') {
            Some(p) => &self.id[..p],
            None => &self.id,
        }
    }
}

/// An assembled, immutable collection of records sharing one spec list.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub specs: Vec<DomainSpec>,
    pub records: Vec<CompoundRecord>,
}

impl Dataset {
    pub fn m(&self) -> usize {
        self.records.len()
    }

    pub fn q(&self) -> Option<usize> {
        self.records.iter().find_map(|r| r.label.as_ref().map(LabelVector::q))
    }
}

/// Joins per-source maps into one dataset.
///
/// With `replicate_on = Some(id)`, that source's map may hold several
/// samples per compound (keys `compound:index`); every other source
/// contributes one vector per compound, copied into each sample.
/// Without it, a plain inner join over ids. A compound present in one
/// source but absent in another is an error unless `mean_impute` is
/// set, in which case the missing vector is imputed with the source
/// mean.
pub fn assemble_dataset(
    per_domain: &[BTreeMap<String, Vec<f64>>],
    specs: &[DomainSpec],
    labels: &BTreeMap<String, LabelVector>,
    replicate_on: Option<usize>,
    mean_impute: bool,
) -> Result<Dataset> {
    validate_specs(specs)?;
    if per_domain.len() != specs.len() {
        return Err(Error::Config(format!(
            "{} source maps for {} specs",
            per_domain.len(),
            specs.len()
        )));
    }

    let domain_means: Vec<Vec<f64>> = per_domain
        .iter()
        .zip(specs)
        .map(|(map, spec)| {
            let mut mean = vec![0.0; spec.dim];
            for v in map.values() {
                for (m, x) in mean.iter_mut().zip(v) {
                    *m += x;
                }
            }
            if !map.is_empty() {
                let n = map.len() as f64;
                for m in &mut mean {
                    *m /= n;
                }
            }
            mean
        })
        .collect();

    // (sample id, compound id) pairs defining the output rows.
    let rows: Vec<(String, String)> = match replicate_on {
        Some(r) => {
            if r >= specs.len() {
                return Err(Error::Config(format!("replicate_on {r} out of range")));
            }
            per_domain[r]
                .keys()
                .map(|k| {
                    let compound = k.rfind(':').map_or(k.as_str(), |p| &k[..p]);
                    (k.clone(), compound.to_string())
                })
                .collect()
        }
        None => {
            let mut ids: Vec<String> = per_domain
                .iter()
                .flat_map(|m| m.keys().cloned())
                .collect();
            ids.sort();
            ids.dedup();
            ids.into_iter().map(|id| (id.clone(), id)).collect()
        }
    };

    // Fail loudly (or impute) when a needed compound misses a source.
    for (j, spec) in specs.iter().enumerate() {
        if replicate_on == Some(j) {
            continue;
        }
        let missing: Vec<String> = rows
            .iter()
            .filter(|(_, compound)| !per_domain[j].contains_key(compound))
            .map(|(_, compound)| compound.clone())
            .collect();
        if !missing.is_empty() && !mean_impute {
            let mut ids = missing;
            ids.dedup();
            return Err(Error::MissingDomain {
                name: spec.name.clone(),
                ids,
            });
        }
    }

    let mut records = Vec::with_capacity(rows.len());
    for (sample_id, compound) in rows {
        let mut features = BTreeMap::new();
        for (j, spec) in specs.iter().enumerate() {
            let key = if replicate_on == Some(j) { &sample_id } else { &compound };
            let v = match per_domain[j].get(key) {
                Some(v) => v.clone(),
                None => domain_means[j].clone(), // only reachable with mean_impute
            };
            if v.len() != spec.dim {
                return Err(Error::Config(format!(
                    "source '{}' vector for '{}' has length {}, expected {}",
                    spec.name,
                    key,
                    v.len(),
                    spec.dim
                )));
            }
            features.insert(spec.id, v);
        }
        records.push(CompoundRecord {
            id: sample_id,
            features,
            label: labels.get(&compound).cloned(),
        });
    }

    Ok(Dataset {
        specs: specs.to_vec(),
        records,
    })
}

/// Seeded three-way split. With `group_by_compound`, all samples of
/// one compound land in the same part (no leakage across replicated
/// sources).
pub fn split(
    ds: &Dataset,
    fractions: (f64, f64, f64),
    seed: u64,
    group_by_compound: bool,
) -> Result<(Dataset, Dataset, Dataset)> {
    let fr = [fractions.0, fractions.1, fractions.2];
    if fr.iter().any(|f| *f <= 0.0) {
        return Err(Error::BadFractions {
            fractions: fr,
            reason: "all fractions must be positive".into(),
        });
    }
    if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::BadFractions {
            fractions: fr,
            reason: "fractions must sum to 1".into(),
        });
    }
    let m = ds.m();
    if m < 3 {
        return Err(Error::DatasetTooSmall { m });
    }

    let n_train = ((m as f64 * fr[0]).round() as usize).min(m);
    let n_val = ((m as f64 * fr[1]).round() as usize).min(m - n_train);
    let mut rng = Rng::substream(seed, "split");

    let subset = |idx: &[usize]| Dataset {
        specs: ds.specs.clone(),
        records: idx.iter().map(|&i| ds.records[i].clone()).collect(),
    };

    if group_by_compound {
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, rec) in ds.records.iter().enumerate() {
            groups.entry(rec.compound()).or_default().push(i);
        }
        let mut order: Vec<&str> = groups.keys().copied().collect();
        rng.shuffle(&mut order);
        let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
        for key in order {
            let members = &groups[key];
            if train.len() < n_train {
                train.extend_from_slice(members);
            } else if val.len() < n_val {
                val.extend_from_slice(members);
            } else {
                test.extend_from_slice(members);
            }
        }
        Ok((subset(&train), subset(&val), subset(&test)))
    } else {
        let mut idx: Vec<usize> = (0..m).collect();
        rng.shuffle(&mut idx);
        let train = &idx[..n_train];
        let val = &idx[n_train..n_train + n_val];
        let test = &idx[n_train + n_val..];
        Ok((subset(train), subset(val), subset(test)))
    }
}

/// Per-feature location/scale statistics, fitted on the training
/// split only and applied before embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    /// Indexed by `DomainSpec::id`: (mean, std) per raw feature.
    pub per_domain: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Standardizer {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        let mut per_domain = Vec::with_capacity(ds.specs.len());
        for spec in &ds.specs {
            let mut mean = vec![0.0; spec.dim];
            let mut sq = vec![0.0; spec.dim];
            let mut n = 0.0;
            for rec in &ds.records {
                let v = rec.features.get(&spec.id).ok_or_else(|| Error::MissingSource {
                    id: rec.id.clone(),
                    name: spec.name.clone(),
                })?;
                for (i, x) in v.iter().enumerate() {
                    mean[i] += x;
                    sq[i] += x * x;
                }
                n += 1.0;
            }
            if n > 0.0 {
                for i in 0..spec.dim {
                    mean[i] /= n;
                    sq[i] = (sq[i] / n - mean[i] * mean[i]).max(0.0).sqrt();
                }
            }
            let std = sq
                .into_iter()
                .map(|s| if s < 1e-12 { 1.0 } else { s })
                .collect();
            per_domain.push((mean, std));
        }
        Ok(Standardizer { per_domain })
    }

    /// Identity statistics (mean 0, std 1) for every source.
    pub fn identity(specs: &[DomainSpec]) -> Self {
        Standardizer {
            per_domain: specs
                .iter()
                .map(|s| (vec![0.0; s.dim], vec![1.0; s.dim]))
                .collect(),
        }
    }

    pub fn transform(&self, domain: usize, raw: &[f64]) -> Vec<f64> {
        let (mean, std) = &self.per_domain[domain];
        raw.iter()
            .zip(mean.iter().zip(std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

#[cfg(test)]
mod tests;
