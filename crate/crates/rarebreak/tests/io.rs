use std::fs;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rarebreak::io::{load_csv, read_schema, read_table, write_csv, write_schema};
use rarebreak::report::{sha256_hex, verify_manifest, Bundle};
use rarebreak::{exit, CliError};
use rarebreak_core::data::{
    make_benchmark, BenchmarkSpec, ColumnSchema, FeatureKind, InferOptions, TabularDataset,
};
use rarebreak_core::{Error, Matrix};

fn small_benchmark(seed: u64) -> TabularDataset {
    make_benchmark(&BenchmarkSpec {
        n_rows: 400,
        n_positives: 30,
        n_continuous: 5,
        n_categorical: 1,
        n_binary: 1,
        class_separation: 2.0,
        seed,
    })
    .unwrap()
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 200;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        // awkward magnitudes and many significant digits
        let e: i32 = rng.random_range(-300..300);
        data.push(rng.random::<f64>() * 10f64.powi(e) * if rng.random() { -1.0 } else { 1.0 });
        data.push(rng.random::<f64>() - 0.5);
        labels.push(rng.random_range(0..2u8));
    }
    let columns = vec![
        ColumnSchema::feature("a", FeatureKind::Continuous),
        ColumnSchema::label("y"),
        ColumnSchema::feature("b", FeatureKind::Continuous),
    ];
    let ds = TabularDataset::new(columns, Matrix::from_vec(n, 2, data).unwrap(), labels).unwrap();
    let csv = dir.path().join("d.csv");
    let schema = dir.path().join("d.schema.json");
    write_csv(&csv, &ds).unwrap();
    write_schema(&schema, ds.columns()).unwrap();
    let back = load_csv(&csv, Some(&schema), &InferOptions::default()).unwrap();
    assert_eq!(back.columns(), ds.columns());
    assert_eq!(back.labels(), ds.labels());
    for (x, y) in back
        .features()
        .as_slice()
        .iter()
        .zip(ds.features().as_slice())
    {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn inference_recovers_benchmark_schema() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_benchmark(1);
    let csv = dir.path().join("b.csv");
    write_csv(&csv, &ds).unwrap();
    let back = load_csv(&csv, None, &InferOptions::default()).unwrap();
    assert_eq!(back.columns(), ds.columns());
    assert_eq!(back.class_counts(), [370, 30]);
}

#[test]
fn schema_sidecar_orders_by_header_and_rejects_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_benchmark(2);
    let schema = dir.path().join("s.json");
    write_schema(&schema, ds.columns()).unwrap();
    let header: Vec<String> = ds.columns().iter().map(|c| c.name.clone()).collect();
    assert_eq!(read_schema(&schema, &header).unwrap(), ds.columns());

    let mut short = header.clone();
    short.pop();
    let err = read_schema(&schema, &short).unwrap_err();
    assert!(matches!(err, CliError::Core(Error::Schema(_))), "{err}");

    let mut extra = header;
    extra.push("zz".into());
    let err = read_schema(&schema, &extra).unwrap_err();
    assert!(err.to_string().contains("zz"), "{err}");
}

#[test]
fn header_only_file_loads_empty() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("h.csv");
    fs::write(&p, "a,b,y\n").unwrap();
    let ds = load_csv(&p, None, &InferOptions::default()).unwrap();
    assert_eq!(ds.row_count(), 0);
    assert_eq!(ds.n_features(), 2);
}

#[test]
fn parse_errors_name_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    fs::write(&p, "a,b,y\n1,2,0\n3,oops,1\n").unwrap();
    let err = read_table(&p).unwrap_err();
    match &err {
        CliError::Core(Error::Parse { row, column, .. }) => {
            assert_eq!(*row, 3);
            assert_eq!(column, "b");
        }
        other => panic!("unexpected {other}"),
    }
    assert_eq!(err.exit_code(), exit::DATA);

    fs::write(&p, "a,b,y\n1,2,0\n3,4\n").unwrap();
    let err = read_table(&p).unwrap_err();
    assert!(
        matches!(err, CliError::Core(Error::Parse { row: 3, .. })),
        "{err}"
    );
}

#[test]
fn label_outside_zero_one_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("l.csv");
    let s = dir.path().join("l.json");
    fs::write(&p, "a,y\n1,0\n2,2\n").unwrap();
    write_schema(
        &s,
        &[
            ColumnSchema::feature("a", FeatureKind::Continuous),
            ColumnSchema::label("y"),
        ],
    )
    .unwrap();
    let err = load_csv(&p, Some(&s), &InferOptions::default()).unwrap_err();
    assert_eq!(err.exit_code(), exit::DATA);
}

#[test]
fn missing_file_is_a_data_error() {
    let err = load_csv(
        "/nonexistent/x.csv".as_ref(),
        None,
        &InferOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, CliError::Io { .. }));
    assert_eq!(err.exit_code(), exit::DATA);
}

#[test]
fn manifest_lists_every_file_with_its_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let mut b = Bundle::new(dir.path());
    b.text("a.csv", "x\n1\n").unwrap();
    b.json("nested/b.json", &[1, 2, 3]).unwrap();
    fs::write(dir.path().join("c.bin"), b"raw").unwrap();
    b.adopt("c.bin").unwrap();
    let m = b.finish("test", 7, &serde_json::json!({"k": 1})).unwrap();
    let paths: Vec<_> = m.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(paths, ["a.csv", "c.bin", "nested/b.json"]);
    assert_eq!(m.files[1].sha256, sha256_hex(b"raw"));
    assert!(verify_manifest(dir.path()).unwrap().is_empty());

    fs::write(dir.path().join("a.csv"), "tampered").unwrap();
    assert_eq!(verify_manifest(dir.path()).unwrap(), ["a.csv"]);
}

#[test]
fn sha256_known_vector() {
    assert_eq!(
        sha256_hex(b"abc"),
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    );
}
