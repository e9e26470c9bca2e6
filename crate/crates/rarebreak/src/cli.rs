use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rarebreak_core::analysis::{global_importance, stratified_background, GlobalImportance};
use rarebreak_core::classifiers::{fit_model, Classifier, ModelKind, TrainedModel};
use rarebreak_core::ctgan::{sample, train_ctgan, CtganModel};
use rarebreak_core::data::{
    apply_scaler, fit_scaler, split, ColumnSchema, ScalerParams, TabularDataset,
};
use rarebreak_core::fidelity::{structure_check, FidelityReport};
use rarebreak_core::metrics::{confusion, evaluate, MetricsSummary};
use rarebreak_core::pipeline::{prepare, run_pipeline_observed, PipelineResult};
use rarebreak_core::rng::derive_seed;
use rarebreak_core::smote::generate_smote;
use rarebreak_core::synthetic::{samples_to_reach_ratio, SyntheticBatch, Technique};
use serde::Serialize;

use crate::checkpoint::{load_classifier, load_ctgan, save_ctgan, ClassifierCheckpoint};
use crate::config::RunConfig;
use crate::error::{exit, CliError, Result};
use crate::io::{
    batch_dataset, dataset_from_rows, load_csv, read_json, read_table, schema_to_json, write_csv,
};
use crate::report::{boxplot_csv, importance_csv, loss_csv, scatter3d_csv, Bundle, Comparison};

#[derive(Debug, Parser)]
#[command(
    name = "rarebreak",
    version,
    about = "Rare-event tabular augmentation: SMOTE, CTGAN, fidelity gating and model comparison"
)]
pub struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for forest fitting and trials. 1 keeps runs trivially reproducible.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON schema sidecar for the input CSV.
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    /// Name of the label column.
    #[arg(long, global = true)]
    pub label: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TechniqueArg {
    Smote,
    Ctgan,
}

impl From<TechniqueArg> for Technique {
    fn from(t: TechniqueArg) -> Self {
        match t {
            TechniqueArg::Smote => Technique::Smote,
            TechniqueArg::Ctgan => Technique::Ctgan,
        }
    }
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    ModelKind::parse(s).ok_or_else(|| format!("unknown model `{s}` (expected rf, dt or lr)"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print row count, class counts, column kinds and the minority ratio.
    Inspect { input: PathBuf },
    /// Seeded train/test split into train.csv and test.csv.
    Split {
        input: PathBuf,
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long)]
        unstratified: bool,
    },
    /// Generate synthetic minority rows and run the structure check.
    Augment {
        input: PathBuf,
        #[arg(long, value_enum)]
        technique: TechniqueArg,
        /// Rows to generate; defaults to enough for the target ratio.
        #[arg(long)]
        count: Option<usize>,
        /// Reuse a trained CTGAN instead of training one.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Fit one classifier and save a checkpoint.
    Train {
        input: PathBuf,
        #[arg(long, value_parser = parse_model)]
        model: ModelKind,
    },
    /// Score a checkpoint on a labelled CSV.
    Evaluate {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Structure check of a synthetic CSV against the real minority rows.
    Fidelity {
        input: PathBuf,
        #[arg(long)]
        synthetic: PathBuf,
    },
    /// The iterative train, evaluate, augment loop with a full report.
    Pipeline {
        input: PathBuf,
        /// Comma-separated model list, e.g. `rf,dt`.
        #[arg(long, value_delimiter = ',', value_parser = parse_model)]
        models: Option<Vec<ModelKind>>,
        /// Maximum number of augmentation techniques to apply.
        #[arg(long = "n")]
        max_techniques: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Per-class Shapley importance and top-3 feature scatter data.
    Explain {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Distribution curves (ECDF, KDE, PCA, t-SNE) for real vs synthetic rows.
    Report {
        input: PathBuf,
        #[arg(long)]
        synthetic: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Inspect { .. } => "inspect",
            Command::Split { .. } => "split",
            Command::Augment { .. } => "augment",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Fidelity { .. } => "fidelity",
            Command::Pipeline { .. } => "pipeline",
            Command::Explain { .. } => "explain",
            Command::Report { .. } => "report",
        }
    }

    fn input(&self) -> &Path {
        match self {
            Command::Inspect { input }
            | Command::Split { input, .. }
            | Command::Augment { input, .. }
            | Command::Train { input, .. }
            | Command::Evaluate { input, .. }
            | Command::Fidelity { input, .. }
            | Command::Pipeline { input, .. }
            | Command::Explain { input, .. }
            | Command::Report { input, .. } => input,
        }
    }
}

/// Config file merged with command-line overrides.
fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => read_json::<RunConfig>(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.unwrap_or(cfg.seed);
    cfg.apply_seed(seed);
    if let Some(s) = &cli.schema {
        cfg.schema = Some(s.clone());
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    if let Some(l) = &cli.label {
        cfg.label = l.clone();
    }
    if cli.threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    cfg.train.parallel = cli.threads > 1;
    match &cli.command {
        Command::Split {
            test_fraction,
            unstratified,
            ..
        } => {
            if let Some(f) = test_fraction {
                cfg.split.test_fraction = *f;
            }
            if *unstratified {
                cfg.split.stratified = false;
            }
        }
        Command::Pipeline {
            models,
            max_techniques,
            trials,
            ..
        } => {
            if let Some(m) = models {
                cfg.pipeline.models = m.clone();
            }
            if let Some(n) = max_techniques {
                cfg.pipeline.max_techniques = *n;
            }
            if let Some(t) = trials {
                cfg.pipeline.n_trials = *t;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    // A missing input is a data error, reported when it is read.
    cfg.input = Some(cli.command.input().to_path_buf());
    Ok(cfg)
}

fn configure_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    if threads > 1 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if threads > 1 {
        log::warn!("built without the `parallel` feature; running single-threaded");
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    exit::OK
                }
                _ => exit::CONFIG,
            };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    let cfg = effective_config(cli)?;
    configure_threads(cli.threads);
    let input = cli.command.input();
    let ds = load_csv(input, cfg.schema.as_deref(), &cfg.infer_options())?;
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("rarebreak-out"));
    let mut bundle = Bundle::new(out);
    let code = match &cli.command {
        Command::Inspect { .. } => inspect(&ds, &mut bundle)?,
        Command::Split { .. } => split_cmd(&ds, &cfg, &mut bundle)?,
        Command::Augment {
            technique,
            count,
            checkpoint,
            ..
        } => augment_cmd(
            &ds,
            &cfg,
            (*technique).into(),
            *count,
            checkpoint.as_deref(),
            &mut bundle,
        )?,
        Command::Train { model, .. } => train_cmd(&ds, &cfg, *model, &mut bundle)?,
        Command::Evaluate { model, .. } => evaluate_cmd(&ds, model, &mut bundle)?,
        Command::Fidelity { synthetic, .. } => fidelity_cmd(&ds, synthetic, &cfg, &mut bundle)?,
        Command::Pipeline { .. } => pipeline_cmd(&ds, &cfg, &mut bundle)?,
        Command::Explain { model, .. } => explain_cmd(&ds, model, &cfg, &mut bundle)?,
        Command::Report { synthetic, .. } => report_cmd(&ds, synthetic, &cfg, &mut bundle)?,
    };
    bundle.finish(cli.command.name(), cfg.seed, &cfg)?;
    Ok(code)
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    rows: usize,
    class_counts: [usize; 2],
    minority_ratio: Option<f64>,
    columns: &'a [ColumnSchema],
}

fn inspect(ds: &TabularDataset, bundle: &mut Bundle) -> Result<i32> {
    let counts = ds.class_counts();
    if ds.row_count() == 0 {
        log::warn!("the input has a header but no data rows");
        eprintln!("warning: no data rows");
    }
    let ratio = (counts[0].max(counts[1]) > 0).then(|| ds.minority_ratio());
    println!("rows: {}", ds.row_count());
    println!("class 0: {}", counts[0]);
    println!("class 1: {}", counts[1]);
    match ratio {
        Some(r) => println!("minority ratio: {r:.6}"),
        None => println!("minority ratio: n/a"),
    }
    for c in ds.columns() {
        let kind = match c.kind {
            rarebreak_core::data::FeatureKind::Continuous => "continuous".to_string(),
            rarebreak_core::data::FeatureKind::Binary => "binary".to_string(),
            rarebreak_core::data::FeatureKind::Categorical { cardinality } => {
                format!("categorical({cardinality})")
            }
        };
        let role = if c.role == rarebreak_core::data::Role::Label {
            " [label]"
        } else {
            ""
        };
        println!("  {}: {kind}{role}", c.name);
    }
    let summary = Summary {
        rows: ds.row_count(),
        class_counts: counts,
        minority_ratio: ratio,
        columns: ds.columns(),
    };
    bundle.json("inspect.json", &summary)?;
    bundle.text("schema.json", &schema_to_json(ds.columns()))?;
    Ok(exit::OK)
}

#[derive(Debug, Serialize)]
struct SplitRecord<'a> {
    seed: u64,
    test_fraction: f64,
    stratified: bool,
    train_indices: &'a [usize],
    test_indices: &'a [usize],
}

fn split_cmd(ds: &TabularDataset, cfg: &RunConfig, bundle: &mut Bundle) -> Result<i32> {
    let s = split(ds, cfg.split.test_fraction, cfg.seed, cfg.split.stratified)?;
    write_csv(&bundle.path("train.csv"), &s.train)?;
    bundle.adopt("train.csv")?;
    write_csv(&bundle.path("test.csv"), &s.test)?;
    bundle.adopt("test.csv")?;
    bundle.text("schema.json", &schema_to_json(ds.columns()))?;
    bundle.json(
        "split.json",
        &SplitRecord {
            seed: cfg.seed,
            test_fraction: cfg.split.test_fraction,
            stratified: cfg.split.stratified,
            train_indices: &s.train_indices,
            test_indices: &s.test_indices,
        },
    )?;
    println!(
        "train: {} rows {:?}; test: {} rows {:?}",
        s.train.row_count(),
        s.train.class_counts(),
        s.test.row_count(),
        s.test.class_counts()
    );
    Ok(exit::OK)
}

fn load_like(path: &Path, template: &TabularDataset) -> Result<TabularDataset> {
    let (header, rows) = read_table(path)?;
    let names: Vec<&str> = template.columns().iter().map(|c| c.name.as_str()).collect();
    if header != names {
        return Err(rarebreak_core::Error::Schema(format!(
            "{}: header {:?} does not match the real data {:?}",
            path.display(),
            header,
            names
        ))
        .into());
    }
    dataset_from_rows(template.columns().to_vec(), &rows)
}

fn write_fidelity(bundle: &mut Bundle, report: &FidelityReport) -> Result<()> {
    bundle.json("fidelity.json", report)?;
    let verdict = if report.pass { "pass" } else { "FAIL" };
    println!(
        "fidelity {verdict}: aggregate KS {:.4}, PCA overlap {:.3}, thresholds KS<={} L1<={} overlap>={}",
        report.aggregate_ks,
        report.pca_overlap,
        report.thresholds.max_ks_per_continuous,
        report.thresholds.max_categorical_l1,
        report.thresholds.min_pca_overlap
    );
    for c in report.continuous.iter().filter(|c| !c.pass) {
        println!(
            "  {} KS {:.4} (p {:.3e})",
            c.name, c.ks.statistic, c.p_value
        );
    }
    for c in report.categorical.iter().filter(|c| !c.pass) {
        println!("  {} L1 {:.4} (p {:.3e})", c.name, c.l1, c.p_value);
    }
    Ok(())
}

fn train_or_load_ctgan(
    ds: &TabularDataset,
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    bundle: &mut Bundle,
) -> Result<CtganModel> {
    match checkpoint {
        Some(p) => load_ctgan(p),
        None => {
            let model = train_ctgan(ds, &cfg.ctgan)?;
            save_ctgan(&bundle.path("ctgan_model.json"), &model)?;
            bundle.adopt("ctgan_model.json")?;
            bundle.text("ctgan_loss.csv", &loss_csv(&model.log))?;
            Ok(model)
        }
    }
}

fn augment_cmd(
    ds: &TabularDataset,
    cfg: &RunConfig,
    technique: Technique,
    count: Option<usize>,
    checkpoint: Option<&Path>,
    bundle: &mut Bundle,
) -> Result<i32> {
    let [n0, n1] = ds.class_counts();
    let count = count.unwrap_or_else(|| samples_to_reach_ratio(n1, n0, cfg.pipeline.target_ratio));
    let batch = match technique {
        Technique::Smote => {
            let (minority, _) = ds.class_rows(1);
            let smote = rarebreak_core::smote::SmoteConfig {
                n_samples: count,
                ..cfg.smote.clone()
            };
            let out = generate_smote(&minority, &ds.feature_schema(), &smote)?;
            if out.k_clamped {
                log::warn!(
                    "k reduced to {} (fewer minority neighbours than requested)",
                    out.effective_k
                );
            }
            out.batch
        }
        Technique::Ctgan => {
            let model = train_or_load_ctgan(ds, cfg, checkpoint, bundle)?;
            let label = ds.label_column().name.clone();
            sample(&model, count, Some((&label, 1)), derive_seed(cfg.seed, 1))?
        }
    };
    write_csv(&bundle.path("synthetic.csv"), &batch_dataset(ds, &batch)?)?;
    bundle.adopt("synthetic.csv")?;
    bundle.json("provenance.json", &batch.provenance)?;
    println!(
        "{}: {} synthetic rows (minority {} -> {})",
        technique.name(),
        batch.len(),
        n1,
        n1 + batch.len()
    );
    if batch.is_empty() {
        println!("nothing to check: empty batch");
        return Ok(exit::OK);
    }
    let report = structure_check(ds, &batch, &cfg.thresholds)?;
    write_fidelity(bundle, &report)?;
    Ok(if report.pass {
        exit::OK
    } else {
        exit::GATE_FAIL
    })
}

fn scaled(ds: &TabularDataset, scaler: &ScalerParams) -> Result<TabularDataset> {
    Ok(apply_scaler(ds, scaler)?)
}

fn identity_scaler(p: usize) -> ScalerParams {
    ScalerParams {
        means: vec![0.0; p],
        stds: vec![1.0; p],
    }
}

#[derive(Debug, Serialize)]
struct MetricsReport {
    rows: usize,
    confusion: rarebreak_core::metrics::ConfusionMatrix,
    metrics: MetricsSummary,
}

fn train_cmd(
    ds: &TabularDataset,
    cfg: &RunConfig,
    kind: ModelKind,
    bundle: &mut Bundle,
) -> Result<i32> {
    let scaler = if cfg.scaler.enabled {
        fit_scaler(ds)
    } else {
        identity_scaler(ds.n_features())
    };
    let train = scaled(ds, &scaler)?;
    let model = fit_model(kind, &train, &cfg.train)?;
    let pred = model.predict(train.features());
    let report = MetricsReport {
        rows: train.row_count(),
        confusion: confusion(&pred, train.labels(), 1)?,
        metrics: evaluate(&pred, train.labels())?,
    };
    let ckpt = ClassifierCheckpoint::new(ds.columns().to_vec(), scaler, cfg.train.clone(), model);
    bundle.json("model.json", &ckpt)?;
    bundle.json("train_metrics.json", &report)?;
    println!(
        "trained {} on {} rows; training class-1 recall {}",
        kind.name(),
        report.rows,
        fmt_opt(report.metrics.class1.recall)
    );
    Ok(exit::OK)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |v| format!("{v:.4}"))
}

fn checkpoint_for(
    ds: &TabularDataset,
    path: &Path,
) -> Result<(ClassifierCheckpoint, TabularDataset)> {
    let ckpt = load_classifier(path)?;
    if ckpt.columns != ds.columns() {
        return Err(rarebreak_core::Error::Schema(
            "input columns differ from the checkpoint's training schema".into(),
        )
        .into());
    }
    let x = scaled(ds, &ckpt.scaler)?;
    Ok((ckpt, x))
}

fn evaluate_cmd(ds: &TabularDataset, model: &Path, bundle: &mut Bundle) -> Result<i32> {
    let (ckpt, x) = checkpoint_for(ds, model)?;
    let pred = ckpt.model.predict(x.features());
    let report = MetricsReport {
        rows: x.row_count(),
        confusion: confusion(&pred, x.labels(), 1)?,
        metrics: evaluate(&pred, x.labels())?,
    };
    bundle.json("metrics.json", &report)?;
    let m = &report.metrics;
    println!(
        "{}: class-1 recall {} precision {}; class-0 recall {}; accuracy {:.4}",
        ckpt.model.kind().name(),
        fmt_opt(m.class1.recall),
        fmt_opt(m.class1.precision),
        fmt_opt(m.class0.recall),
        m.overall_accuracy
    );
    Ok(exit::OK)
}

fn fidelity_cmd(
    ds: &TabularDataset,
    synthetic: &Path,
    cfg: &RunConfig,
    bundle: &mut Bundle,
) -> Result<i32> {
    let synth = load_like(synthetic, ds)?;
    let batch = batch_from(&synth);
    let report = structure_check(ds, &batch, &cfg.thresholds)?;
    write_fidelity(bundle, &report)?;
    Ok(if report.pass {
        exit::OK
    } else {
        exit::GATE_FAIL
    })
}

fn batch_from(ds: &TabularDataset) -> SyntheticBatch {
    SyntheticBatch {
        rows: ds.features().clone(),
        labels: ds.labels().to_vec(),
        provenance: Vec::new(),
    }
}

fn report_cmd(
    ds: &TabularDataset,
    synthetic: &Path,
    cfg: &RunConfig,
    bundle: &mut Bundle,
) -> Result<i32> {
    let synth = load_like(synthetic, ds)?;
    let batch = batch_from(&synth);
    let tsne_cfg = (!cfg.report.skip_tsne).then_some(&cfg.report.tsne);
    Comparison {
        real: ds,
        batch: &batch,
    }
    .write(bundle, "curves/", tsne_cfg, cfg.report.svg)?;
    let report = structure_check(ds, &batch, &cfg.thresholds)?;
    write_fidelity(bundle, &report)?;
    Ok(exit::OK)
}

/// Global importance of `model` on `ds` (already scaled), plus the three
/// most important class-1 features.
fn importance(
    model: &TrainedModel,
    ds: &TabularDataset,
    cfg: &RunConfig,
) -> Result<([GlobalImportance; 2], [usize; 3])> {
    let e = &cfg.report.explain;
    let background = stratified_background(ds, e.background, derive_seed(cfg.seed, 7));
    let f = |r: &[f64]| model.proba_row(r);
    let imp = global_importance(
        f,
        ds,
        &background,
        e.permutations,
        e.max_instances,
        derive_seed(cfg.seed, 8),
    )?;
    let rank = imp[1].ranking();
    let p = ds.n_features();
    let top = [
        rank[0],
        rank.get(1).copied().unwrap_or(rank[0] % p),
        rank.get(2).copied().unwrap_or(rank[0] % p),
    ];
    Ok((imp, top))
}

fn write_importance(
    bundle: &mut Bundle,
    raw: &TabularDataset,
    imp: &[GlobalImportance; 2],
    top: [usize; 3],
) -> Result<()> {
    bundle.json("importance.json", imp)?;
    bundle.text("importance.csv", &importance_csv(imp))?;
    bundle.text("scatter3d.csv", &scatter3d_csv(raw, top))?;
    let names = raw.feature_names();
    println!(
        "top class-1 features: {}, {}, {}",
        names[top[0]], names[top[1]], names[top[2]]
    );
    Ok(())
}

fn explain_cmd(
    ds: &TabularDataset,
    model: &Path,
    cfg: &RunConfig,
    bundle: &mut Bundle,
) -> Result<i32> {
    let (ckpt, x) = checkpoint_for(ds, model)?;
    if x.row_count() == 0 {
        return Err(CliError::Data("cannot explain an empty dataset".into()));
    }
    let (imp, top) = importance(&ckpt.model, &x, cfg)?;
    write_importance(bundle, ds, &imp, top)?;
    Ok(exit::OK)
}

fn pipeline_cmd(ds: &TabularDataset, cfg: &RunConfig, bundle: &mut Bundle) -> Result<i32> {
    let pcfg = cfg.pipeline_config();
    let tsne_cfg = (!cfg.report.skip_tsne).then_some(&cfg.report.tsne);
    let mut batches: Vec<(usize, Technique, SyntheticBatch)> = Vec::new();
    let mut curve_error = None;
    let result: PipelineResult = run_pipeline_observed(ds, &pcfg, |ev| {
        let prefix = format!("curves/iter{}_{}_", ev.iteration, ev.technique.name());
        if let Err(e) = (Comparison {
            real: ev.real_train,
            batch: ev.batch,
        })
        .write(bundle, &prefix, tsne_cfg, cfg.report.svg)
        {
            curve_error.get_or_insert(e);
        }
        if ev.fidelity.pass {
            batches.push((ev.iteration, ev.technique, ev.batch.clone()));
        }
    })?;
    if let Some(e) = curve_error {
        return Err(e);
    }
    bundle.json("pipeline_result.json", &result)?;
    let fidelity: Vec<_> = result
        .records
        .iter()
        .filter_map(|r| r.fidelity.as_ref().map(|f| (r.iteration, r.technique, true, f)))
        .chain(result.rejected.iter().map(|r| (r.iteration, Some(r.technique), false, &r.fidelity)))
        .map(|(iteration, technique, accepted, report)| {
            serde_json::json!({ "iteration": iteration, "technique": technique, "accepted": accepted, "report": report })
        })
        .collect();
    bundle.json("fidelity.json", &fidelity)?;
    let metrics: Vec<_> = result
        .records
        .iter()
        .map(|r| {
            serde_json::json!({
                "iteration": r.iteration,
                "technique": r.technique,
                "train_counts": r.train_counts,
                "models": r.evaluations.iter().map(|e| serde_json::json!({ "model": e.model, "distribution": e.distribution })).collect::<Vec<_>>(),
            })
        })
        .collect();
    bundle.json("metrics.json", &metrics)?;
    bundle.text("boxplot.csv", &boxplot_csv(&result.records))?;

    // Attribution for the selected model, refitted on its iteration's training set.
    let best = result.best_model;
    let prep = prepare(ds, &pcfg)?;
    let train = match batches.iter().find(|(i, _, _)| *i == best.iteration) {
        Some((_, _, b)) => prep.train.append_rows(&b.rows, 1)?,
        None => prep.train.clone(),
    };
    let model = fit_model(best.model, &scaled(&train, &prep.scaler)?, &pcfg.train)?;
    let (imp, top) = importance(&model, &prep.test_scaled, cfg)?;
    write_importance(bundle, ds, &imp, top)?;

    for r in &result.records {
        let tech = r.technique.map_or("real", |t| t.name());
        for e in &r.evaluations {
            println!(
                "iteration {} ({tech}) {}: median class-1 recall {}, class-0 recall {}",
                r.iteration,
                e.model.name(),
                fmt_opt(e.distribution.recall_class1.map(|q| q.median)),
                fmt_opt(e.distribution.recall_class0.map(|q| q.median)),
            );
        }
    }
    if let Some(rej) = &result.rejected {
        println!(
            "gate rejected {} at iteration {}",
            rej.technique.name(),
            rej.iteration
        );
    }
    println!(
        "best model: {} (iteration {}, {}) median {:?} {:.4}",
        best.model.name(),
        best.iteration,
        best.technique.map_or("real", |t| t.name()),
        best.metric,
        best.value
    );
    Ok(exit::OK)
}
