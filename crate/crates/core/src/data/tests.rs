use super::*;
use std::path::PathBuf;

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hetembed-data-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn spec(id: usize, dim: usize) -> DomainSpec {
    DomainSpec {
        id,
        name: format!("d{id}"),
        dim,
    }
}

#[test]
fn load_domain_csv_shapes() {
    let dir = tmp_dir("load");
    let path = dir.join("a.csv");
    std::fs::write(&path, "id,f0,f1\nx,1.0,2.0\ny,3.0,4.0\nz,5.0,6.0\n").unwrap();
    let map = load_domain_csv(&path, &spec(0, 2)).unwrap();
    assert_eq!(map.len(), 3);
    assert_eq!(map["y"], vec![3.0, 4.0]);
}

#[test]
fn load_domain_csv_wide_header_accepted() {
    let dir = tmp_dir("wide");
    let path = dir.join("phys.csv");
    let header: Vec<String> = std::iter::once("id".into())
        .chain((0..80).map(|i| format!("f{i}")))
        .collect();
    let row: Vec<String> = std::iter::once("c1".into())
        .chain((0..80).map(|i| format!("{}.5", i)))
        .collect();
    std::fs::write(&path, format!("{}\n{}\n", header.join(","), row.join(","))).unwrap();
    let map = load_domain_csv(&path, &spec(0, 80)).unwrap();
    assert_eq!(map["c1"].len(), 80);
}

#[test]
fn load_domain_csv_rejects_nan_cell() {
    let dir = tmp_dir("nan");
    let path = dir.join("a.csv");
    std::fs::write(&path, "id,f0,f1\nx,1.0,NaN\n").unwrap();
    match load_domain_csv(&path, &spec(0, 2)) {
        Err(Error::BadCell { row, col, .. }) => {
            assert_eq!((row, col), (2, 3));
        }
        other => panic!("expected BadCell, got {other:?}"),
    }
}

#[test]
fn load_domain_csv_distinct_errors() {
    let dir = tmp_dir("errs");
    let missing = dir.join("nope.csv");
    assert!(matches!(
        load_domain_csv(&missing, &spec(0, 2)),
        Err(Error::MissingFile { .. })
    ));

    let ragged = dir.join("ragged.csv");
    std::fs::write(&ragged, "id,f0,f1\nx,1.0\n").unwrap();
    assert!(matches!(
        load_domain_csv(&ragged, &spec(0, 2)),
        Err(Error::RaggedRow { row: 2, .. })
    ));

    let wrong = dir.join("wrong.csv");
    std::fs::write(&wrong, "id,f0,f1,f2\nx,1,2,3\n").unwrap();
    assert!(matches!(
        load_domain_csv(&wrong, &spec(0, 2)),
        Err(Error::WrongDimension { got: 3, expected: 2, .. })
    ));
}

fn labels_for(ids: &[&str], q: usize) -> BTreeMap<String, LabelVector> {
    ids.iter()
        .map(|id| (id.to_string(), LabelVector::from_indices(q, &[0])))
        .collect()
}

#[test]
fn assemble_replicates_slow_sources() {
    let specs = vec![spec(0, 2), spec(1, 3)];
    let mut expr = BTreeMap::new();
    expr.insert("A:0".to_string(), vec![1.0, 2.0]);
    expr.insert("A:1".to_string(), vec![3.0, 4.0]);
    let mut fp = BTreeMap::new();
    fp.insert("A".to_string(), vec![7.0, 8.0, 9.0]);
    let ds = assemble_dataset(&[expr, fp], &specs, &labels_for(&["A"], 3), Some(0), false).unwrap();
    assert_eq!(ds.m(), 2);
    for rec in &ds.records {
        assert_eq!(rec.features[&1], vec![7.0, 8.0, 9.0]);
        assert_eq!(rec.compound(), "A");
        assert!(rec.label.is_some());
    }
}

#[test]
fn assemble_empty_join_is_valid() {
    let specs = vec![spec(0, 1), spec(1, 1)];
    let ds = assemble_dataset(
        &[BTreeMap::new(), BTreeMap::new()],
        &specs,
        &BTreeMap::new(),
        None,
        false,
    )
    .unwrap();
    assert_eq!(ds.m(), 0);
}

#[test]
fn assemble_missing_domain_errors() {
    let specs = vec![spec(0, 1), spec(1, 1)];
    let mut a = BTreeMap::new();
    a.insert("A".to_string(), vec![1.0]);
    let b = BTreeMap::new();
    match assemble_dataset(&[a, b], &specs, &labels_for(&["A"], 2), None, false) {
        Err(Error::MissingDomain { name, ids }) => {
            assert_eq!(name, "d1");
            assert_eq!(ids, vec!["A".to_string()]);
        }
        other => panic!("expected MissingDomain, got {other:?}"),
    }
}

#[test]
fn assemble_mean_impute_fills_gaps() {
    let specs = vec![spec(0, 1), spec(1, 1)];
    let mut a = BTreeMap::new();
    a.insert("A".to_string(), vec![1.0]);
    a.insert("B".to_string(), vec![3.0]);
    let mut b = BTreeMap::new();
    b.insert("A".to_string(), vec![10.0]);
    let ds = assemble_dataset(&[a, b], &specs, &labels_for(&["A", "B"], 2), None, true).unwrap();
    assert_eq!(ds.m(), 2);
    let rec_b = ds.records.iter().find(|r| r.id == "B").unwrap();
    assert_eq!(rec_b.features[&1], vec![10.0]); // the domain mean
}

fn toy_dataset(m: usize) -> Dataset {
    let specs = vec![spec(0, 2)];
    let records = (0..m)
        .map(|i| CompoundRecord {
            id: format!("r{i}"),
            features: BTreeMap::from([(0, vec![i as f64, 0.0])]),
            label: Some(LabelVector::from_indices(3, &[i % 3])),
        })
        .collect();
    Dataset { specs, records }
}

#[test]
fn split_sizes_and_reproducibility() {
    let ds = toy_dataset(10);
    let (tr1, va1, te1) = split(&ds, (0.8, 0.1, 0.1), 7, false).unwrap();
    assert_eq!((tr1.m(), va1.m(), te1.m()), (8, 1, 1));
    let (tr2, va2, te2) = split(&ds, (0.8, 0.1, 0.1), 7, false).unwrap();
    let ids = |d: &Dataset| d.records.iter().map(|r| r.id.clone()).collect::<Vec<_>>();
    assert_eq!(ids(&tr1), ids(&tr2));
    assert_eq!(ids(&va1), ids(&va2));
    assert_eq!(ids(&te1), ids(&te2));
}

#[test]
fn split_preserves_multiset_and_disjointness() {
    let ds = toy_dataset(23);
    let (tr, va, te) = split(&ds, (0.6, 0.2, 0.2), 3, false).unwrap();
    let mut all: Vec<String> = [&tr, &va, &te]
        .iter()
        .flat_map(|d| d.records.iter().map(|r| r.id.clone()))
        .collect();
    assert_eq!(all.len(), 23);
    all.sort();
    all.dedup();
    assert_eq!(all.len(), 23, "splits must be pairwise disjoint");
}

#[test]
fn split_groups_stay_together() {
    let specs = vec![spec(0, 1)];
    let records: Vec<CompoundRecord> = (0..4)
        .flat_map(|c| {
            (0..4).map(move |s| CompoundRecord {
                id: format!("c{c}:{s}"),
                features: BTreeMap::from([(0, vec![0.0])]),
                label: Some(LabelVector::from_indices(2, &[0])),
            })
        })
        .collect();
    let ds = Dataset { specs, records };
    let (tr, va, te) = split(&ds, (0.5, 0.25, 0.25), 1, true).unwrap();
    for part in [&tr, &va, &te] {
        for rec in &part.records {
            let compound = rec.compound().to_string();
            let everywhere = [&tr, &va, &te]
                .iter()
                .filter(|d| d.records.iter().any(|r| r.compound() == compound))
                .count();
            assert_eq!(everywhere, 1, "compound {compound} crosses splits");
        }
    }
}

#[test]
fn split_rejects_bad_fractions() {
    let ds = toy_dataset(10);
    assert!(matches!(
        split(&ds, (0.5, 0.5, 0.5), 1, false),
        Err(Error::BadFractions { .. })
    ));
    assert!(matches!(
        split(&toy_dataset(2), (0.4, 0.3, 0.3), 1, false),
        Err(Error::DatasetTooSmall { m: 2 })
    ));
}

#[test]
fn synth_same_seed_bit_identical() {
    let cfg = SynthConfig {
        samples: 50,
        ..SynthConfig::default()
    };
    let a = synth_generate(&cfg).unwrap();
    let b = synth_generate(&cfg).unwrap();
    assert_eq!(a.m(), b.m());
    for (ra, rb) in a.records.iter().zip(&b.records) {
        assert_eq!(ra.id, rb.id);
        assert_eq!(ra.label, rb.label);
        for (va, vb) in ra.features.values().zip(rb.features.values()) {
            assert!(va
                .iter()
                .zip(vb)
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

#[test]
fn synth_label_cardinality() {
    let cfg = SynthConfig {
        samples: 100,
        ..SynthConfig::default()
    };
    let ds = synth_generate(&cfg).unwrap();
    for rec in &ds.records {
        let ones = rec.label.as_ref().unwrap().count_ones();
        assert!((1..=3).contains(&ones), "record {} has {ones} labels", rec.id);
    }
}

#[test]
fn synth_all_classes_present_at_200() {
    for seed in [1, 2, 3] {
        let cfg = SynthConfig {
            samples: 200,
            seed,
            ..SynthConfig::default()
        };
        let ds = synth_generate(&cfg).unwrap();
        let mut counts = vec![0usize; 14];
        for rec in &ds.records {
            for i in rec.label.as_ref().unwrap().ones() {
                counts[i] += 1;
            }
        }
        assert!(counts.iter().all(|&c| c > 0), "seed {seed}: {counts:?}");
    }
}

/// Solves `a x = b` for a small dense symmetric system (Gaussian
/// elimination with partial pivoting). Test-only regression helper.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let d = a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / d;
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// Residuals of `y` after least-squares regression on `[1, z]`.
fn residuals(y: &[f64], z_rows: &[Vec<f64>]) -> Vec<f64> {
    let n = y.len();
    let p = z_rows[0].len() + 1;
    let design: Vec<Vec<f64>> = z_rows
        .iter()
        .map(|z| std::iter::once(1.0).chain(z.iter().copied()).collect())
        .collect();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, &yi) in design.iter().zip(y) {
        for i in 0..p {
            xty[i] += row[i] * yi;
            for j in 0..p {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    let beta = solve(xtx, xty);
    (0..n)
        .map(|i| y[i] - design[i].iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>())
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt()).max(1e-300)
}

/// Pooled residual correlation between two domains: regress every
/// feature column on `[1, z]`, pair column c of one domain with column
/// c of the other, and correlate the pooled residual series.
fn residual_correlation(ds: &Dataset) -> f64 {
    let z_rows: Vec<Vec<f64>> = ds
        .records
        .iter()
        .map(|r| r.label.as_ref().unwrap().as_f64())
        .collect();
    let paired = ds.specs[0].dim.min(ds.specs[1].dim);
    let mut pooled0 = Vec::new();
    let mut pooled1 = Vec::new();
    for feature in 0..paired {
        let col = |domain: usize| -> Vec<f64> {
            ds.records
                .iter()
                .map(|r| r.features[&domain][feature])
                .collect()
        };
        pooled0.extend(residuals(&col(0), &z_rows));
        pooled1.extend(residuals(&col(1), &z_rows));
    }
    pearson(&pooled0, &pooled1)
}

#[test]
fn synth_dependency_zero_decorrelates_residuals() {
    let base = SynthConfig {
        domains: 2,
        dims: vec![48, 56],
        samples: 500,
        dependency: 0.0,
        seed: 9,
        ..SynthConfig::default()
    };
    let rho_indep = residual_correlation(&synth_generate(&base).unwrap());
    assert!(
        rho_indep.abs() < 0.1,
        "residual correlation {rho_indep} at dependency 0"
    );
    // No assertion on the coupled case: the shared latent enters the
    // maps under per-record sign carriers, a dependence Pearson
    // correlation on residuals largely cannot see.
}

#[test]
fn standardizer_centers_training_data() {
    let cfg = SynthConfig {
        samples: 120,
        ..SynthConfig::default()
    };
    let ds = synth_generate(&cfg).unwrap();
    let st = Standardizer::fit(&ds).unwrap();
    for spec in &ds.specs {
        let mut mean = vec![0.0; spec.dim];
        let mut sq = vec![0.0; spec.dim];
        for rec in &ds.records {
            let v = st.transform(spec.id, &rec.features[&spec.id]);
            for (i, x) in v.iter().enumerate() {
                mean[i] += x;
                sq[i] += x * x;
            }
        }
        let n = ds.m() as f64;
        for i in 0..spec.dim {
            assert!((mean[i] / n).abs() < 1e-9);
            assert!((sq[i] / n - 1.0).abs() < 1e-9);
        }
    }
}
