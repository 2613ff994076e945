//! `pnd`: simulate trade streams, build features, train and evaluate the
//! five ensembles with and without SMOTE.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use pnd_core::eval::{
    compute_metrics, confusion, format_pct, render_csv, render_metrics_table, render_timing_table,
    run_experiment_on, stratified_split, ExperimentConfig, ExperimentResult, TrainOverrides,
    Variant,
};
use pnd_core::features::{compute_features, read_feature_csv, rows_to_dataset, write_feature_csv, WindowConfig};
use pnd_core::ingest::{chunkize, label_chunks, parse_events, parse_trades, write_chunks};
use pnd_core::learners::{deserialize_model, serialize_model, train, ModelKind};
use pnd_core::resample::{smote, SmoteConfig};
use pnd_core::synth::{make_benchmark, BenchmarkConfig, Manifest};
use pnd_core::{Dataset, Error};

#[derive(Parser, Debug)]
#[command(name = "pnd", version, about = "Pump-and-dump detection with tree ensembles and SMOTE")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// JSON config file; command-line flags take precedence over it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic multi-stream benchmark with injected pumps.
    Simulate(SimulateArgs),
    /// Chunk a trade CSV, label it from an event CSV and write feature rows.
    Featurize(FeaturizeArgs),
    /// Split, optionally oversample, train one model and save it.
    Train(TrainArgs),
    /// Score a saved model on a feature CSV.
    Evaluate(EvaluateArgs),
    /// Train every selected model on original and SMOTE data; report test metrics.
    Experiment(ExperimentArgs),
    /// Training-time table, one cell at a time.
    Bench(ExperimentArgs),
}

#[derive(Args, Debug, Default, Clone)]
struct WindowFlags {
    /// Chunk length in seconds [default: 25].
    #[arg(long)]
    chunk_seconds: Option<u32>,
    /// Rolling window length in hours [default: 7].
    #[arg(long)]
    window_hours: Option<f64>,
}

#[derive(Args, Debug, Default, Clone)]
struct TrainFlags {
    #[arg(long)]
    n_trees: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// L2 penalty on leaf weights.
    #[arg(long = "lambda")]
    lambda_reg: Option<f64>,
    /// Minimum split gain.
    #[arg(long = "gamma")]
    gamma_min_gain: Option<f64>,
    #[arg(long)]
    max_leaves: Option<usize>,
    #[arg(long)]
    n_bins: Option<usize>,
    #[arg(long)]
    min_samples_leaf: Option<usize>,
}

impl TrainFlags {
    fn overrides(&self) -> TrainOverrides {
        TrainOverrides {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            learning_rate: self.learning_rate,
            lambda_reg: self.lambda_reg,
            gamma_min_gain: self.gamma_min_gain,
            max_leaves: self.max_leaves,
            n_bins: self.n_bins,
            min_samples_leaf: self.min_samples_leaf,
            feature_subsample: None,
        }
    }
}

#[derive(Args, Debug, Default, Clone)]
struct SplitFlags {
    /// Training fraction of each class [default: 0.7].
    #[arg(long)]
    train_frac: Option<f64>,
    /// Oversample the training split with SMOTE.
    #[arg(long, overrides_with = "no_smote")]
    smote: bool,
    /// Train on the original split only.
    #[arg(long, overrides_with = "smote")]
    no_smote: bool,
    /// SMOTE neighbour count [default: 5].
    #[arg(long)]
    smote_k: Option<usize>,
    /// Seed for every stochastic stage; a random one is drawn and printed if omitted.
    #[arg(long)]
    seed: Option<u64>,
}

impl SplitFlags {
    /// `Some(true)` for `--smote`, `Some(false)` for `--no-smote`.
    fn smote_choice(&self) -> Option<bool> {
        match (self.smote, self.no_smote) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Output directory for stream CSVs, features.csv and manifest.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    streams: Option<usize>,
    #[arg(long)]
    days: Option<f64>,
    #[arg(long)]
    events_per_stream: Option<usize>,
    /// Required negative:positive ratio (refused if missed by more than 10%).
    #[arg(long)]
    imbalance_target: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    window: WindowFlags,
}

#[derive(Args, Debug)]
struct FeaturizeArgs {
    #[arg(long)]
    trades: PathBuf,
    /// Pump events; without it every row is labelled 0.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Feature CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the labelled chunk table.
    #[arg(long)]
    chunks_out: Option<PathBuf>,
    #[command(flatten)]
    window: WindowFlags,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Feature CSV or benchmark manifest.
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    model: ModelKind,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    split: SplitFlags,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Feature CSV or benchmark manifest.
    #[arg(long)]
    features: PathBuf,
    /// Score only the test partition of the split `train` used.
    #[arg(long)]
    test_split: bool,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Feature CSV or benchmark manifest.
    #[arg(long)]
    features: PathBuf,
    /// Comma-separated kinds (rf, ada, gbm, xgb, lgbm) or `all`.
    #[arg(long)]
    models: Option<String>,
    /// Report CSV to write; a JSON record with the effective config is written beside it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    split: SplitFlags,
    #[command(flatten)]
    train: TrainFlags,
}

/// Optional settings loaded from `--config`.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    train_frac: Option<f64>,
    smote: Option<bool>,
    models: Option<Vec<ModelKind>>,
    window: Option<WindowConfig>,
    smote_params: Option<SmoteConfig>,
    train: TrainOverrides,
    benchmark: Option<BenchmarkConfig>,
}

struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::fmt::Debug for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

fn load_file_config(path: Option<&Path>) -> anyhow::Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let f = File::open(path).map_err(|e| usage(format!("cannot open config {}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> u64 {
    flag.or(file).unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s} (none given; rerun with --seed {s} to reproduce)");
        s
    })
}

fn window_config(flags: &WindowFlags, file: &FileConfig) -> WindowConfig {
    let mut w = file.window.unwrap_or_default();
    if let Some(s) = flags.chunk_seconds {
        w.chunk_len_s = s;
    }
    if let Some(h) = flags.window_hours {
        w.window_hours = h;
    }
    w
}

/// Reads a feature CSV, or the combined feature CSV named by a manifest.
fn load_features(path: &Path) -> anyhow::Result<Dataset> {
    let csv_path = if path.extension().is_some_and(|e| e == "json") {
        let m = Manifest::read(path).with_context(|| format!("reading manifest {}", path.display()))?;
        path.parent().unwrap_or(Path::new(".")).join(m.features)
    } else {
        path.to_path_buf()
    };
    let f = File::open(&csv_path).with_context(|| format!("opening {}", csv_path.display()))?;
    let rows = read_feature_csv(BufReader::new(f)).with_context(|| format!("reading {}", csv_path.display()))?;
    Ok(rows_to_dataset(&rows)?)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn cmd_simulate(a: &SimulateArgs, file: &FileConfig) -> anyhow::Result<()> {
    let mut bc = file.benchmark.clone().unwrap_or_default();
    bc.window = window_config(&a.window, file);
    if let Some(v) = a.streams {
        bc.n_streams = v;
    }
    if let Some(v) = a.days {
        bc.days_per_stream = v;
    }
    if let Some(v) = a.events_per_stream {
        bc.events_per_stream = v;
    }
    if a.imbalance_target.is_some() {
        bc.imbalance_target = a.imbalance_target;
    }
    bc.seed = resolve_seed(a.seed, file.seed.or(file.benchmark.as_ref().map(|b| b.seed)));
    let (m, path) = make_benchmark(&bc, &a.out)?;
    println!("streams           {}", m.streams.len());
    println!("positive rows     {}", m.n_pos);
    println!("negative rows     {}", m.n_neg);
    println!("imbalance         {:.1}:1", m.achieved_imbalance);
    let dropped: usize = m.summaries.iter().map(|s| s.warmup_dropped).sum();
    println!("warm-up dropped   {dropped}");
    println!("manifest          {}", path.display());
    Ok(())
}

fn cmd_featurize(a: &FeaturizeArgs, file: &FileConfig) -> anyhow::Result<()> {
    let w = window_config(&a.window, file);
    w.validate().map_err(|e| usage(e.to_string()))?;
    let trades = parse_trades(BufReader::new(
        File::open(&a.trades).with_context(|| format!("opening {}", a.trades.display()))?,
    ))
    .with_context(|| format!("reading {}", a.trades.display()))?;
    let events = match &a.events {
        Some(p) => parse_events(BufReader::new(File::open(p).with_context(|| format!("opening {}", p.display()))?))
            .with_context(|| format!("reading {}", p.display()))?,
        None => Vec::new(),
    };
    let chunks = label_chunks(&chunkize(&trades, w.chunk_len_s)?, &events)?;
    if let Some(p) = &a.chunks_out {
        write_chunks(&chunks, create(p)?)?;
    }
    let out = compute_features(&chunks, &w)?;
    let n = write_feature_csv(&out.rows, create(&a.out)?)?;
    let pos = out.rows.iter().filter(|r| r.label == 1).count();
    println!("trades            {}", trades.len());
    println!("chunks            {}", chunks.len());
    println!("events            {}", events.len());
    println!("feature rows      {n} ({pos} positive)");
    println!("warm-up dropped   {}", out.warmup_dropped);
    for s in &out.dropped_positive_starts {
        println!("  positive chunk at {s} lost to warm-up");
    }
    Ok(())
}

fn experiment_config(a: &ExperimentArgs, file: &FileConfig, bench: bool) -> anyhow::Result<ExperimentConfig> {
    let models = match &a.models {
        Some(s) => ModelKind::parse_list(s).map_err(|e| usage(e.to_string()))?,
        None => file.models.clone().unwrap_or_else(|| ModelKind::ALL.to_vec()),
    };
    let use_smote = a.split.smote_choice().or(file.smote);
    let variants = match (use_smote, bench) {
        (Some(false), _) => vec![Variant::Original],
        (None, true) | (Some(true), true) => vec![Variant::Smote],
        _ => vec![Variant::Original, Variant::Smote],
    };
    let mut smote_cfg = file.smote_params.unwrap_or_default();
    if let Some(k) = a.split.smote_k {
        smote_cfg.k_neighbors = k;
    }
    let cfg = ExperimentConfig {
        models,
        variants,
        train_frac: a.split.train_frac.or(file.train_frac).unwrap_or(0.7),
        seed: resolve_seed(a.split.seed, file.seed),
        smote: smote_cfg,
        train: file.train.merged(&a.train.overrides()),
        bench,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn write_reports(result: &ExperimentResult, out: &Path) -> anyhow::Result<()> {
    create(out)?.write_all(render_csv(&result.reports).as_bytes())?;
    let json = out.with_extension("json");
    serde_json::to_writer_pretty(create(&json)?, result)?;
    eprintln!("wrote {} and {}", out.display(), json.display());
    Ok(())
}

fn cmd_experiment(a: &ExperimentArgs, file: &FileConfig, bench: bool) -> anyhow::Result<()> {
    let cfg = experiment_config(a, file, bench)?;
    let data = load_features(&a.features)?;
    let result = run_experiment_on(&data, &cfg)?;
    println!("# config {}", serde_json::to_string(&cfg)?);
    println!(
        "# train {} pos / {} neg, test {} pos / {} neg{}",
        result.train_pos,
        result.train_neg,
        result.test_pos,
        result.test_neg,
        result
            .smote_pos
            .map_or(String::new(), |p| format!(", SMOTE train {p} pos"))
    );
    if !bench {
        println!();
        print!("{}", render_metrics_table(&result.reports));
    }
    println!();
    print!("{}", render_timing_table(&result.reports));
    if let Some(out) = &a.out {
        write_reports(&result, out)?;
    }
    Ok(())
}

fn cmd_train(a: &TrainArgs, file: &FileConfig) -> anyhow::Result<()> {
    let seed = resolve_seed(a.split.seed, file.seed);
    let cfg = ExperimentConfig {
        models: vec![a.model],
        train_frac: a.split.train_frac.or(file.train_frac).unwrap_or(0.7),
        seed,
        smote: SmoteConfig {
            k_neighbors: a
                .split
                .smote_k
                .unwrap_or(file.smote_params.map_or(5, |s| s.k_neighbors)),
            ..file.smote_params.unwrap_or_default()
        },
        train: file.train.merged(&a.train.overrides()),
        ..Default::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let use_smote = a.split.smote_choice().or(file.smote).unwrap_or(false);

    let data = load_features(&a.features)?;
    let (train_set, test_set) = stratified_split(&data, cfg.train_frac, cfg.split_seed())?;
    let train_set = if use_smote {
        smote(
            &train_set,
            &SmoteConfig {
                seed: cfg.smote_seed(),
                ..cfg.smote
            },
        )?
    } else {
        train_set
    };
    let params = cfg.train.apply(a.model, cfg.model_seed());
    let model = train(a.model, &train_set, &params)?;
    serialize_model(&model, create(&a.out)?)?;

    let cm = confusion(&model.predict(test_set.features())?, test_set.labels())?;
    let m = compute_metrics(&cm)?;
    println!(
        "{} ({}) trained on {} rows ({} positive); test accuracy {} precision {} recall {} f1 {}",
        a.model.display_name(),
        if use_smote { "SMOTE" } else { "original" },
        train_set.n_rows(),
        train_set.n_pos(),
        format_pct(Some(m.accuracy)),
        format_pct(m.precision),
        format_pct(m.recall),
        format_pct(m.f1)
    );
    println!("model written to {}", a.out.display());
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs, file: &FileConfig) -> anyhow::Result<()> {
    let model = deserialize_model(BufReader::new(
        File::open(&a.model).with_context(|| format!("opening {}", a.model.display()))?,
    ))?;
    let mut data = load_features(&a.features)?;
    if a.test_split {
        let cfg = ExperimentConfig {
            seed: a
                .seed
                .or(file.seed)
                .ok_or_else(|| usage("--test-split needs the --seed used for training"))?,
            train_frac: a.train_frac.or(file.train_frac).unwrap_or(0.7),
            ..Default::default()
        };
        data = stratified_split(&data, cfg.train_frac, cfg.split_seed())?.1;
    }
    let cm = confusion(&model.predict(data.features())?, data.labels())?;
    let m = compute_metrics(&cm)?;
    println!("model       {}", model.kind.display_name());
    println!("rows        {} ({} positive)", data.n_rows(), data.n_pos());
    println!("tp {}  fp {}  tn {}  fn {}", cm.tp, cm.fp, cm.tn, cm.fn_);
    println!("accuracy    {}", format_pct(Some(m.accuracy)));
    println!("precision   {}", format_pct(m.precision));
    println!("recall      {}", format_pct(m.recall));
    println!("f1          {}", format_pct(m.f1));
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let file = load_file_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, &file),
        Command::Featurize(a) => cmd_featurize(a, &file),
        Command::Train(a) => cmd_train(a, &file),
        Command::Evaluate(a) => cmd_evaluate(a, &file),
        Command::Experiment(a) => cmd_experiment(a, &file, false),
        Command::Bench(a) => cmd_experiment(a, &file, true),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
