//! CSV ingestion and emission.
//!
//! One file per feature source: UTF-8, comma-separated, header row
//! `id,<f0>,<f1>,...`, one sample per line. Label files use the same
//! layout with 0/1 cells.

use super::{label_names, DomainSpec, Dataset, LabelVector};
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

fn read_lines(path: &Path) -> Result<Vec<String>> {
    if !path.exists() {
        return Err(Error::MissingFile {
            path: path.to_path_buf(),
        });
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Loads one feature-source file, keyed by sample id. Rows and columns
/// in error messages are 1-based file positions.
pub fn load_domain_csv(path: &Path, spec: &DomainSpec) -> Result<BTreeMap<String, Vec<f64>>> {
    let lines = read_lines(path)?;
    let mut iter = lines.iter().enumerate();
    let (_, header) = iter.next().ok_or_else(|| Error::RaggedRow {
        path: path.to_path_buf(),
        row: 1,
        got: 0,
        expected: spec.dim + 1,
    })?;
    let header_cols = header.split(',').count();
    if header_cols != spec.dim + 1 {
        return Err(Error::WrongDimension {
            path: path.to_path_buf(),
            name: spec.name.clone(),
            got: header_cols - 1,
            expected: spec.dim,
        });
    }

    let mut out = BTreeMap::new();
    for (i, line) in iter {
        if line.is_empty() {
            continue;
        }
        let row = i + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != spec.dim + 1 {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                row,
                got: cells.len(),
                expected: spec.dim + 1,
            });
        }
        let id = cells[0].trim().to_string();
        let mut v = Vec::with_capacity(spec.dim);
        for (c, cell) in cells[1..].iter().enumerate() {
            let parsed: f64 = cell.trim().parse().unwrap_or(f64::NAN);
            if !parsed.is_finite() {
                return Err(Error::BadCell {
                    path: path.to_path_buf(),
                    row,
                    col: c + 2,
                    cell: cell.trim().to_string(),
                });
            }
            v.push(parsed);
        }
        if out.insert(id.clone(), v).is_some() {
            return Err(Error::Config(format!(
                "{}: duplicate id '{}' at row {}",
                path.display(),
                id,
                row
            )));
        }
    }
    Ok(out)
}

/// Loads a label file with `q` 0/1 columns. Every row must set at
/// least one label.
pub fn load_labels_csv(path: &Path, q: usize) -> Result<BTreeMap<String, LabelVector>> {
    let lines = read_lines(path)?;
    let mut iter = lines.iter().enumerate();
    let (_, header) = iter.next().ok_or_else(|| Error::RaggedRow {
        path: path.to_path_buf(),
        row: 1,
        got: 0,
        expected: q + 1,
    })?;
    let header_cols = header.split(',').count();
    if header_cols != q + 1 {
        return Err(Error::WrongDimension {
            path: path.to_path_buf(),
            name: "labels".into(),
            got: header_cols - 1,
            expected: q,
        });
    }

    let mut out = BTreeMap::new();
    for (i, line) in iter {
        if line.is_empty() {
            continue;
        }
        let row = i + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != q + 1 {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                row,
                got: cells.len(),
                expected: q + 1,
            });
        }
        let id = cells[0].trim().to_string();
        let mut bits = Vec::with_capacity(q);
        for (c, cell) in cells[1..].iter().enumerate() {
            match cell.trim() {
                "0" => bits.push(false),
                "1" => bits.push(true),
                other => {
                    return Err(Error::BadCell {
                        path: path.to_path_buf(),
                        row,
                        col: c + 2,
                        cell: other.to_string(),
                    })
                }
            }
        }
        let label = LabelVector::new(bits);
        if label.count_ones() == 0 {
            return Err(Error::Config(format!(
                "{}: row {} ('{}') sets no label; every sample needs at least one",
                path.display(),
                row,
                id
            )));
        }
        if out.insert(id, label).is_some() {
            return Err(Error::Config(format!(
                "{}: duplicate id at row {}",
                path.display(),
                row
            )));
        }
    }
    Ok(out)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    let f = std::fs::File::create(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    Ok(std::io::BufWriter::new(f))
}

fn fmt_f64(x: f64) -> String {
    // Shortest representation that round-trips, so generated files are
    // exact.
    format!("{x:?}")
}

/// Writes one `domain_<id>.csv` per source plus `labels.csv` into
/// `dir`; returns the paths in source order followed by the label file.
pub fn write_dataset_csvs(ds: &Dataset, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut paths = Vec::new();
    for spec in &ds.specs {
        let path = dir.join(format!("domain_{}.csv", spec.id));
        let mut w = create(&path)?;
        let header: Vec<String> = std::iter::once("id".to_string())
            .chain((0..spec.dim).map(|i| format!("f{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        for rec in &ds.records {
            let v = rec.features.get(&spec.id).ok_or_else(|| Error::MissingSource {
                id: rec.id.clone(),
                name: spec.name.clone(),
            })?;
            let cells: Vec<String> = std::iter::once(rec.id.clone())
                .chain(v.iter().map(|x| fmt_f64(*x)))
                .collect();
            writeln!(w, "{}", cells.join(","))
                .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        }
        paths.push(path);
    }

    if let Some(q) = ds.q() {
        let path = dir.join("labels.csv");
        let labels: BTreeMap<String, LabelVector> = ds
            .records
            .iter()
            .filter_map(|r| r.label.clone().map(|l| (r.id.clone(), l)))
            .collect();
        write_labels_csv(&path, q, &labels)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Writes a label CSV (`id,<name>,...` header, 0/1 cells).
pub fn write_labels_csv(
    path: &Path,
    q: usize,
    labels: &BTreeMap<String, LabelVector>,
) -> Result<()> {
    let mut w = create(path)?;
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain(label_names(q))
        .collect();
    writeln!(w, "{}", header.join(","))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    for (id, label) in labels {
        let cells: Vec<String> = std::iter::once(id.clone())
            .chain(label.bits().iter().map(|&b| if b { "1".into() } else { "0".to_string() }))
            .collect();
        writeln!(w, "{}", cells.join(","))
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    }
    Ok(())
}
