use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rarebreak::io::write_csv;
use rarebreak::report::{sha256_hex, verify_manifest, Manifest};
use rarebreak_core::data::{
    make_benchmark, make_toy, BenchmarkSpec, ColumnSchema, FeatureKind, TabularDataset,
};
use rarebreak_core::Matrix;
use serde_json::Value;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Out {
    let o = Command::new(env!("CARGO_BIN_EXE_rarebreak"))
        .args(args)
        .output()
        .expect("binary runs");
    Out {
        code: o.status.code().expect("exit code"),
        stdout: String::from_utf8_lossy(&o.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, ds: &TabularDataset) -> PathBuf {
    let p = dir.join(name);
    write_csv(&p, ds).unwrap();
    p
}

fn write_config(dir: &Path, cfg: Value) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    p
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// Gaussian classes on `p` continuous columns with exact class counts.
fn gaussian(n0: usize, n1: usize, p: usize, shift: f64, seed: u64) -> TabularDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (n, label) in [(n0, 0u8), (n1, 1u8)] {
        for _ in 0..n {
            for j in 0..p {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(z + if label == 1 && j == 0 { shift } else { 0.0 });
            }
            labels.push(label);
        }
    }
    let mut columns: Vec<_> = (0..p)
        .map(|j| ColumnSchema::feature(format!("f{j}"), FeatureKind::Continuous))
        .collect();
    columns.push(ColumnSchema::label("y"));
    TabularDataset::new(columns, Matrix::from_vec(n0 + n1, p, data).unwrap(), labels).unwrap()
}

fn small_benchmark(seed: u64) -> TabularDataset {
    make_benchmark(&BenchmarkSpec {
        n_rows: 600,
        n_positives: 40,
        n_continuous: 6,
        n_categorical: 1,
        n_binary: 1,
        class_separation: 2.5,
        seed,
    })
    .unwrap()
}

/// Small forest, short CTGAN and no t-SNE, so full pipelines run in seconds.
fn quick_config() -> Value {
    serde_json::json!({
        "train": { "n_trees": 10, "max_depth": 8, "epochs": 200 },
        "ctgan": { "epochs": 5, "batch_size": 100 },
        "report": { "skip_tsne": true, "svg": false, "explain": { "background": 10, "permutations": 5, "max_instances": 10 } }
    })
}

#[test]
fn inspect_reports_counts_and_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", &small_benchmark(1));
    let out = dir.path().join("out");
    let r = run(&["inspect", s(&input), "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("rows: 600"));
    assert!(r.stdout.contains("class 0: 560"));
    assert!(r.stdout.contains("class 1: 40"));
    let j = json(&out.join("inspect.json"));
    assert_eq!(j["rows"], 600);
    assert_eq!(j["class_counts"], serde_json::json!([560, 40]));
    assert!(verify_manifest(&out).unwrap().is_empty());
}

#[test]
fn header_only_input_warns_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("h.csv");
    fs::write(&input, "a,b,y\n").unwrap();
    let r = run(&["inspect", s(&input), "--out", s(&dir.path().join("o"))]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("rows: 0"));
    assert!(r.stderr.contains("warning"), "{}", r.stderr);
}

#[test]
fn malformed_input_exits_3_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("m.csv");
    fs::write(&input, "a,b,y\n1,2,0\n1,x,1\n").unwrap();
    let r = run(&["inspect", s(&input), "--out", s(&dir.path().join("o"))]);
    assert_eq!(r.code, 3);
    assert!(
        r.stderr.contains("row 3") && r.stderr.contains("column b"),
        "{}",
        r.stderr
    );

    let r = run(&[
        "inspect",
        s(&dir.path().join("absent.csv")),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(r.code, 3);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", &small_benchmark(2));
    let o = dir.path().join("o");
    let cfg = write_config(dir.path(), serde_json::json!({ "no_such_key": 1 }));
    assert_eq!(
        run(&["inspect", s(&input), "--config", s(&cfg), "--out", s(&o)]).code,
        2
    );
    let cfg = write_config(
        dir.path(),
        serde_json::json!({ "thresholds": { "max_ks_per_continuous": 2.0 } }),
    );
    assert_eq!(
        run(&["inspect", s(&input), "--config", s(&cfg), "--out", s(&o)]).code,
        2
    );
    assert_eq!(
        run(&[
            "inspect",
            s(&input),
            "--config",
            s(&dir.path().join("nope.json"))
        ])
        .code,
        2
    );
    assert_eq!(run(&["augment", s(&input), "--technique", "gan"]).code, 2);
    assert_eq!(run(&["pipeline", s(&input), "--models", "svm"]).code, 2);
    assert_eq!(
        run(&["inspect", s(&input), "--threads", "0", "--out", s(&o)]).code,
        2
    );
    assert_eq!(run(&["--help"]).code, 0);
}

#[test]
fn split_writes_disjoint_halves() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", &small_benchmark(3));
    let out = dir.path().join("o");
    let r = run(&[
        "split",
        s(&input),
        "--test-fraction",
        "0.25",
        "--out",
        s(&out),
        "--seed",
        "4",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (train, test) = (
        csv_rows(&out.join("train.csv")),
        csv_rows(&out.join("test.csv")),
    );
    assert_eq!(train.len() + test.len(), 600);
    assert_eq!(test.len(), 150);
    let pos = |rows: &[Vec<String>]| rows.iter().filter(|r| r[0] == "1").count();
    assert_eq!(pos(&test), 10);
    assert_eq!(pos(&train), 30);
}

#[test]
fn smote_to_four_in_ten_writes_5056_rows() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", &gaussian(12_783, 95, 3, 2.0, 5));
    let out = dir.path().join("o");
    let r = run(&[
        "augment",
        s(&input),
        "--technique",
        "smote",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.code, 0, "{}\n{}", r.stdout, r.stderr);
    let rows = csv_rows(&out.join("synthetic.csv"));
    assert_eq!(rows.len(), 5_056);
    assert!(rows.iter().all(|r| r.last().unwrap() == "1"));
    let prov = json(&out.join("provenance.json"));
    assert_eq!(prov.as_array().unwrap().len(), 5_056);
    assert_eq!(json(&out.join("fidelity.json"))["pass"], true);
    assert!(verify_manifest(&out).unwrap().is_empty());
}

#[test]
fn impossible_gate_exits_4_and_still_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", &gaussian(300, 30, 3, 2.0, 6));
    let out = dir.path().join("o");
    let cfg = write_config(
        dir.path(),
        serde_json::json!({ "thresholds": {
            "max_ks_per_continuous": 0.0, "max_categorical_l1": 0.0,
            "min_pca_overlap": 1.0, "finite_sample_alpha": null } }),
    );
    let r = run(&[
        "augment",
        s(&input),
        "--technique",
        "smote",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
    ]);
    assert_eq!(r.code, 4, "{}", r.stderr);
    assert!(out.join("synthetic.csv").exists());
    assert_eq!(json(&out.join("fidelity.json"))["pass"], false);
    assert!(verify_manifest(&out).unwrap().is_empty());

    // the same batch through the standalone fidelity command
    let r = run(&[
        "fidelity",
        s(&input),
        "--synthetic",
        s(&out.join("synthetic.csv")),
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("f")),
    ]);
    assert_eq!(r.code, 4);
    let r = run(&[
        "fidelity",
        s(&input),
        "--synthetic",
        s(&out.join("synthetic.csv")),
        "--out",
        s(&dir.path().join("g")),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
}

#[test]
fn ctgan_on_toy_passes_the_gate() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "toy.csv", &make_toy(5_000, 11).unwrap());
    let out = dir.path().join("o");
    let r = run(&[
        "augment",
        s(&input),
        "--technique",
        "ctgan",
        "--out",
        s(&out),
        "--seed",
        "1",
    ]);
    assert_eq!(r.code, 0, "{}\n{}", r.stdout, r.stderr);
    let f = json(&out.join("fidelity.json"));
    for c in f["continuous"].as_array().unwrap() {
        assert!(c["ks"]["statistic"].as_f64().unwrap() <= 0.15, "{c}");
    }
    assert!(out.join("ctgan_model.json").exists());
    assert_eq!(csv_rows(&out.join("ctgan_loss.csv")).len(), 300);

    // reusing the checkpoint reproduces the batch without retraining
    let again = dir.path().join("again");
    let r = run(&[
        "augment",
        s(&input),
        "--technique",
        "ctgan",
        "--seed",
        "1",
        "--checkpoint",
        s(&out.join("ctgan_model.json")),
        "--out",
        s(&again),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(
        fs::read(out.join("synthetic.csv")).unwrap(),
        fs::read(again.join("synthetic.csv")).unwrap()
    );
}

#[test]
fn train_evaluate_explain_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let train = write(dir.path(), "train.csv", &gaussian(400, 100, 1, 3.0, 7));
    let test = write(dir.path(), "test.csv", &gaussian(200, 50, 1, 3.0, 8));
    let m = dir.path().join("m");
    let r = run(&["train", s(&train), "--model", "lr", "--out", s(&m)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let e = dir.path().join("e");
    let r = run(&[
        "evaluate",
        s(&test),
        "--model",
        s(&m.join("model.json")),
        "--out",
        s(&e),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let recall = json(&e.join("metrics.json"))["metrics"]["class1"]["recall"]
        .as_f64()
        .unwrap();
    assert!(recall > 0.8, "{recall}");

    let x = dir.path().join("x");
    let r = run(&[
        "explain",
        s(&test),
        "--model",
        s(&m.join("model.json")),
        "--out",
        s(&x),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let imp = csv_rows(&x.join("importance.csv"));
    let class1: Vec<_> = imp.iter().filter(|r| r[0] == "1").collect();
    assert_eq!(class1[0][2], "f0");
    let header = fs::read_to_string(x.join("scatter3d.csv")).unwrap();
    let first = header.lines().next().unwrap();
    assert_eq!(first.split(',').count(), 4);
    assert!(first.ends_with(",label"));
    assert_eq!(csv_rows(&x.join("scatter3d.csv")).len(), 250);

    let r = run(&[
        "explain",
        s(&test),
        "--model",
        s(&dir.path().join("missing.json")),
        "--out",
        s(&x),
    ]);
    assert_eq!(r.code, 2);
    let other = write(dir.path(), "other.csv", &gaussian(20, 20, 2, 1.0, 9));
    let r = run(&[
        "evaluate",
        s(&other),
        "--model",
        s(&m.join("model.json")),
        "--out",
        s(&e),
    ]);
    assert_eq!(r.code, 3, "{}", r.stderr);
}

#[test]
fn pipeline_n0_has_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", &small_benchmark(4));
    let cfg = write_config(dir.path(), quick_config());
    let out = dir.path().join("o");
    let r = run(&[
        "pipeline",
        s(&input),
        "--models",
        "rf",
        "--n",
        "0",
        "--trials",
        "3",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let res = json(&out.join("pipeline_result.json"));
    assert_eq!(res["records"].as_array().unwrap().len(), 1);
    assert_eq!(res["best_model"]["model"], "rf");
    assert!(r.stdout.contains("best model: rf"));
}

#[test]
fn pipeline_bundle_is_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", &small_benchmark(5));
    let input_hash = sha256_hex(&fs::read(&input).unwrap());
    let cfg = write_config(dir.path(), quick_config());
    let outs: Vec<PathBuf> = (0..2).map(|k| dir.path().join(format!("o{k}"))).collect();
    for o in &outs {
        let r = run(&[
            "pipeline",
            s(&input),
            "--seed",
            "9",
            "--config",
            s(&cfg),
            "--out",
            s(o),
        ]);
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    assert_eq!(
        sha256_hex(&fs::read(&input).unwrap()),
        input_hash,
        "input mutated"
    );

    let manifests: Vec<Manifest> = outs
        .iter()
        .map(|o| serde_json::from_value(json(&o.join("manifest.json"))).unwrap())
        .collect();
    assert_eq!(
        manifests[0].files, manifests[1].files,
        "outputs differ between identical runs"
    );
    // the echoed configs differ only in the output directory
    let strip = |m: &Manifest| {
        let mut c = m.config.clone();
        c.as_object_mut().unwrap().remove("out");
        c
    };
    assert_eq!(strip(&manifests[0]), strip(&manifests[1]));
    for o in &outs {
        assert!(verify_manifest(o).unwrap().is_empty());
    }
    let listed: Vec<&str> = manifests[0].files.iter().map(|f| f.path.as_str()).collect();
    for want in [
        "pipeline_result.json",
        "metrics.json",
        "fidelity.json",
        "boxplot.csv",
        "importance.csv",
        "importance.json",
        "scatter3d.csv",
    ] {
        assert!(listed.contains(&want), "{want} missing from {listed:?}");
    }
    assert!(listed
        .iter()
        .any(|p| p.starts_with("curves/iter1_smote_ecdf")));

    // 25 trials per (model, class, iteration)
    let res = json(&outs[0].join("pipeline_result.json"));
    let iterations = res["records"].as_array().unwrap().len();
    let rows = csv_rows(&outs[0].join("boxplot.csv"));
    let mut counts = std::collections::BTreeMap::new();
    for r in &rows {
        *counts
            .entry((r[0].clone(), r[2].clone(), r[3].clone()))
            .or_insert(0) += 1;
    }
    assert_eq!(counts.len(), iterations * 3 * 2);
    assert!(counts.values().all(|&c| c == 25), "{counts:?}");
}
