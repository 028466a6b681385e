//! `ilgamma`: split data, train models and ensembles, predict, evaluate,
//! featurize and inspect model files.
//!
//! Exit codes: 0 success, 2 input error (bad files, SMILES, flags or
//! configuration), 3 internal error.

mod config;

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use ilgamma_core::dataset::{self, load_test_membership, GraphCache};
use ilgamma_core::ensemble::{train_ensemble, train_model};
use ilgamma_core::evaluate::export_parity;
use ilgamma_core::featurize::{featurize_smiles, write_feature_csv, EDGE_FEATURE_NAMES, NODE_FEATURE_NAMES};
use ilgamma_core::trainer::TrainHistory;
use ilgamma_core::{
    DataRecord, Dataset, Ensemble, EnsembleConfig, Error, MetricReport, ModelArtifact, ModelKind, Regressor,
    SplitMode, Splits, TemperatureScale,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use config::{resolve, ResolvedConfig};

/// Failure classes, mapped to distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Internal(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

macro_rules! impl_from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Error::from(e).into()
            }
        }
    )*};
}

impl_from_core!(
    ilgamma_core::error::DataError,
    ilgamma_core::error::ModelError,
    ilgamma_core::error::ArtifactError,
    ilgamma_core::error::TrainError
);

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "ilgamma", version, about = "Activity coefficients at infinite dilution in ionic liquids")]
struct Cli {
    /// Machine-readable JSON instead of aligned text.
    #[arg(long, global = true)]
    json: bool,
    /// TOML (or JSON) configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory holding `dataset.csv`; relative `--data` paths resolve here.
    #[arg(long, global = true, env = "ILGAMMA_DATA_DIR", value_name = "DIR")]
    data_dir: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Gnn,
    Mcm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Subset {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Args)]
struct TrainFlags {
    /// Model architecture.
    #[arg(long)]
    model: Option<KindArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Cap on optimizer steps.
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a split manifest (record indices per split).
    Split {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        mode: Option<SplitMode>,
        #[arg(long)]
        seed: Option<u64>,
        /// Fixed test membership: a JSON index array or a split manifest.
        #[arg(long, value_name = "FILE")]
        test_membership: Option<PathBuf>,
        /// Output directory; receives `splits.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model on a split's train/validation records.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        splits: PathBuf,
        #[command(flatten)]
        flags: TrainFlags,
        #[arg(long, default_value = "model.bin")]
        out: PathBuf,
        /// Per-epoch CSV.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Train an ensemble on re-drawn train/validation splits.
    TrainEnsemble {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        splits: PathBuf,
        #[command(flatten)]
        flags: TrainFlags,
        /// Number of members.
        #[arg(long)]
        n: Option<usize>,
        /// Members trained concurrently.
        #[arg(long)]
        parallel: Option<usize>,
        /// Output directory; receives `ensemble.json` and member files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict ln γ∞ for one system or a batch file.
    Predict {
        /// Model file, `ensemble.json`, or an ensemble directory.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, required_unless_present = "batch", conflicts_with = "batch")]
        cation: Option<String>,
        #[arg(long, required_unless_present = "batch")]
        anion: Option<String>,
        #[arg(long, required_unless_present = "batch")]
        solute: Option<String>,
        /// Temperature in K.
        #[arg(long, short = 'T', required_unless_present = "batch")]
        temperature: Option<f64>,
        /// Needed only by MCM models.
        #[arg(long)]
        cation_family: Option<String>,
        /// Needed only by MCM models.
        #[arg(long)]
        solute_family: Option<String>,
        /// CSV with cation_smiles, anion_smiles, solute_smiles, temperature_K
        /// (family columns optional).
        #[arg(long)]
        batch: Option<PathBuf>,
    },
    /// Metrics of a model or ensemble on one subset of a split.
    Evaluate {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        /// Split manifest; defaults to the ensemble's recorded test set.
        #[arg(long)]
        splits: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        subset: Subset,
        /// Parity CSV output.
        #[arg(long)]
        parity: Option<PathBuf>,
        /// Parity SVG output.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Node and edge feature vectors of one molecule as CSV.
    Featurize {
        smiles: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a model file and verify its checksum.
    InspectModel { path: PathBuf },
    /// Print the resolved configuration with per-field provenance.
    Config {
        #[command(flatten)]
        flags: TrainFlags,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let ctx = Context {
        json: cli.json,
        config_file: cli.config,
        data_dir: cli.data_dir,
    };
    match cli.command {
        Command::Split {
            data,
            mode,
            seed,
            test_membership,
            out,
        } => cmd_split(&ctx, data, mode, seed, test_membership, &out),
        Command::Train {
            data,
            splits,
            flags,
            out,
            history,
        } => cmd_train(&ctx, data, &splits, &flags, &out, history.as_deref()),
        Command::TrainEnsemble {
            data,
            splits,
            flags,
            n,
            parallel,
            out,
        } => cmd_train_ensemble(&ctx, data, &splits, &flags, n, parallel, &out),
        Command::Predict {
            model,
            cation,
            anion,
            solute,
            temperature,
            cation_family,
            solute_family,
            batch,
        } => {
            let rows = match batch {
                Some(path) => read_batch(&path)?,
                None => vec![PredictRow {
                    cation_smiles: cation.unwrap_or_default(),
                    anion_smiles: anion.unwrap_or_default(),
                    solute_smiles: solute.unwrap_or_default(),
                    temperature: temperature.unwrap_or(f64::NAN),
                    cation_family: cation_family.unwrap_or_default(),
                    solute_family: solute_family.unwrap_or_default(),
                }],
            };
            cmd_predict(&ctx, &model, rows)
        }
        Command::Evaluate {
            data,
            model,
            splits,
            subset,
            parity,
            svg,
        } => cmd_evaluate(&ctx, data, &model, splits.as_deref(), subset, parity.as_deref(), svg.as_deref()),
        Command::Featurize { smiles, out } => cmd_featurize(&ctx, &smiles, out.as_deref()),
        Command::InspectModel { path } => cmd_inspect(&ctx, &path),
        Command::Config { flags } => {
            let resolved = ctx.resolve(&train_flags(&flags))?;
            if ctx.json {
                print!("{}", resolved.to_json());
            } else {
                for (path, source) in &resolved.provenance {
                    let value = lookup(&resolved, path);
                    println!("{path:<36} {value:<28} {}", json!(source).as_str().unwrap_or(""));
                }
            }
            Ok(())
        }
    }
}

struct Context {
    json: bool,
    config_file: Option<PathBuf>,
    data_dir: Option<PathBuf>,
}

impl Context {
    fn resolve(&self, flags: &[(&str, Value)]) -> CliResult<ResolvedConfig> {
        resolve(self.config_file.as_deref(), flags)
    }

    /// `--data` as given, resolved against the data directory when relative
    /// and not found; `<data dir>/dataset.csv` when absent.
    fn data_path(&self, data: Option<PathBuf>) -> CliResult<PathBuf> {
        match (data, &self.data_dir) {
            (Some(p), Some(dir)) if p.is_relative() && !p.exists() => Ok(dir.join(p)),
            (Some(p), _) => Ok(p),
            (None, Some(dir)) => Ok(dir.join("dataset.csv")),
            (None, None) => Err(CliError::Input(
                "no --data given and ILGAMMA_DATA_DIR is not set".into(),
            )),
        }
    }

    fn load_data(&self, data: Option<PathBuf>) -> CliResult<Dataset> {
        let path = self.data_path(data)?;
        log::info!("loading {}", path.display());
        Ok(Dataset::load(&path)?)
    }

    fn emit(&self, value: &Value, table: impl FnOnce() -> String) {
        if self.json {
            println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
        } else {
            print!("{}", table());
        }
    }
}

fn lookup(resolved: &ResolvedConfig, path: &str) -> String {
    let tree = serde_json::to_value(&resolved.config).expect("config serializes");
    let value = path.split('.').fold(&tree, |v, k| &v[k]);
    value.to_string()
}

fn train_flags(flags: &TrainFlags) -> Vec<(&'static str, Value)> {
    let mut out = Vec::new();
    if let Some(kind) = flags.model {
        out.push((
            "model",
            json!(match kind {
                KindArg::Gnn => "gnn",
                KindArg::Mcm => "mcm",
            }),
        ));
    }
    if let Some(v) = flags.seed {
        out.push(("train.seed", json!(v)));
    }
    if let Some(v) = flags.max_epochs {
        out.push(("train.max_epochs", json!(v)));
    }
    if let Some(v) = flags.batch_size {
        out.push(("train.batch_size", json!(v)));
    }
    if let Some(v) = flags.lr {
        out.push(("train.initial_lr", json!(v)));
    }
    if let Some(v) = flags.max_steps {
        out.push(("train.max_steps", json!(v)));
    }
    out
}

/// Key/value lines with aligned values.
fn kv_table(rows: &[(&str, String)]) -> String {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::new();
    for (k, v) in rows {
        let _ = writeln!(s, "{k:<width$}  {v}");
    }
    s
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("cannot write {}: {e}", path.display()))
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

/// `<file>.run.json` next to a file output.
fn sidecar(file: &Path) -> PathBuf {
    let mut name = file.file_name().unwrap_or_default().to_os_string();
    name.push(".run.json");
    file.with_file_name(name)
}

fn load_splits(path: &Path, data: &Dataset) -> CliResult<Splits> {
    let splits = Splits::load(path)?;
    if splits.num_records != data.len() {
        return Err(CliError::Input(format!(
            "{} describes {} records but the dataset has {}",
            path.display(),
            splits.num_records,
            data.len()
        )));
    }
    Ok(splits)
}

fn cmd_split(
    ctx: &Context,
    data: Option<PathBuf>,
    mode: Option<SplitMode>,
    seed: Option<u64>,
    test_membership: Option<PathBuf>,
    out: &Path,
) -> CliResult {
    let mut flags = Vec::new();
    if let Some(m) = mode {
        flags.push(("split.mode", json!(m)));
    }
    if let Some(s) = seed {
        flags.push(("split.seed", json!(s)));
    }
    let resolved = ctx.resolve(&flags)?;
    let data = ctx.load_data(data)?;
    let test = test_membership.as_deref().map(load_test_membership).transpose()?;
    let splits = dataset::split(&data.records, &resolved.config.split, test.as_deref())?;
    create_dir(out)?;
    let path = out.join("splits.json");
    splits.save(&path)?;
    resolved.save(&out.join("run.json"))?;
    let summary = json!({
        "mode": splits.mode,
        "seed": splits.seed,
        "records": splits.num_records,
        "train": splits.train.len(),
        "val": splits.val.len(),
        "test": splits.test.len(),
        "manifest": path,
    });
    ctx.emit(&summary, || {
        kv_table(&[
            ("mode", summary["mode"].as_str().unwrap_or("").to_string()),
            ("seed", splits.seed.to_string()),
            ("records", splits.num_records.to_string()),
            ("train", splits.train.len().to_string()),
            ("val", splits.val.len().to_string()),
            ("test", splits.test.len().to_string()),
            ("manifest", path.display().to_string()),
        ])
    });
    Ok(())
}

fn write_history(history: &TrainHistory, path: &Path) -> CliResult {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    history.write_csv(BufWriter::new(file))?;
    Ok(())
}

fn history_summary(history: &TrainHistory) -> Value {
    json!({
        "epochs": history.epochs.len(),
        "steps": history.steps,
        "best_epoch": history.best_epoch,
        "best_val_loss": history.best_val_loss,
        "stop_reason": history.stop_reason,
    })
}

fn cmd_train(
    ctx: &Context,
    data: Option<PathBuf>,
    splits: &Path,
    flags: &TrainFlags,
    out: &Path,
    history_path: Option<&Path>,
) -> CliResult {
    let resolved = ctx.resolve(&train_flags(flags))?;
    let cfg = &resolved.config;
    let data = ctx.load_data(data)?;
    let splits = load_splits(splits, &data)?;
    let (artifact, history) = train_model(&data, &splits.train, &splits.val, &cfg.model_choice(), &cfg.train)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    artifact.save(out)?;
    resolved.save(&sidecar(out))?;
    if let Some(p) = history_path {
        write_history(&history, p)?;
    }
    let mut summary = history_summary(&history);
    summary["model"] = json!(artifact.kind());
    summary["parameter_count"] = json!(artifact.manifest.parameter_count);
    summary["out"] = json!(out);
    ctx.emit(&summary, || {
        kv_table(&[
            ("model", summary["model"].as_str().unwrap_or("").to_string()),
            ("parameters", artifact.manifest.parameter_count.to_string()),
            ("epochs", history.epochs.len().to_string()),
            ("steps", history.steps.to_string()),
            ("best epoch", history.best_epoch.to_string()),
            ("best val loss", format!("{:.6}", history.best_val_loss)),
            ("stop reason", summary["stop_reason"].as_str().unwrap_or("").to_string()),
            ("saved", out.display().to_string()),
        ])
    });
    Ok(())
}

fn cmd_train_ensemble(
    ctx: &Context,
    data: Option<PathBuf>,
    splits: &Path,
    flags: &TrainFlags,
    n: Option<usize>,
    parallel: Option<usize>,
    out: &Path,
) -> CliResult {
    let mut overrides = train_flags(flags);
    if let Some(n) = n {
        overrides.push(("ensemble.size", json!(n)));
    }
    if let Some(p) = parallel {
        overrides.push(("ensemble.parallel", json!(p)));
    }
    let resolved = ctx.resolve(&overrides)?;
    let cfg = &resolved.config;
    let data = ctx.load_data(data)?;
    let base = load_splits(splits, &data)?;
    let ens_cfg = EnsembleConfig {
        size: cfg.ensemble.size,
        base_seed: cfg.train.seed,
        model: cfg.model_choice(),
        train: cfg.train.clone(),
        split: cfg.split.clone(),
    };
    let (ensemble, histories) = train_ensemble(&data, &base, &ens_cfg, cfg.ensemble.parallel)?;
    let manifest = ensemble.save(out)?;
    for (i, h) in histories.iter().enumerate() {
        write_history(h, &out.join(format!("member_{i:03}_history.csv")))?;
    }
    resolved.save(&out.join("run.json"))?;
    let members: Vec<Value> = histories
        .iter()
        .zip(&ensemble.seeds)
        .map(|(h, s)| {
            let mut v = history_summary(h);
            v["seed"] = json!(s);
            v
        })
        .collect();
    let summary = json!({ "members": members, "manifest": manifest });
    ctx.emit(&summary, || {
        let mut s = format!("{:>6} {:>8} {:>8} {:>10} {:>14}\n", "member", "seed", "epochs", "best", "best val loss");
        for (i, (h, seed)) in histories.iter().zip(&ensemble.seeds).enumerate() {
            let _ = writeln!(
                s,
                "{i:>6} {seed:>8} {:>8} {:>10} {:>14.6}",
                h.epochs.len(),
                h.best_epoch,
                h.best_val_loss
            );
        }
        let _ = writeln!(s, "saved {}", manifest.display());
        s
    });
    Ok(())
}

/// A model file, an ensemble manifest, or a directory holding one.
fn load_predictor(path: &Path) -> CliResult<(Ensemble, bool)> {
    let manifest = if path.is_dir() {
        Some(path.join("ensemble.json"))
    } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        Some(path.to_path_buf())
    } else {
        None
    };
    Ok(match manifest {
        Some(m) => (Ensemble::load(&m)?, true),
        None => (Ensemble::single(ModelArtifact::load(path)?), false),
    })
}

#[derive(Debug, Clone, Deserialize)]
struct PredictRow {
    cation_smiles: String,
    anion_smiles: String,
    solute_smiles: String,
    #[serde(rename = "temperature_K")]
    temperature: f64,
    #[serde(default)]
    cation_family: String,
    #[serde(default)]
    solute_family: String,
}

fn read_batch(path: &Path) -> CliResult<Vec<PredictRow>> {
    let file = File::open(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file)
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), i + 2))))
        .collect()
}

#[derive(Debug, Serialize)]
struct PredictOutput {
    cation_smiles: String,
    anion_smiles: String,
    solute_smiles: String,
    #[serde(rename = "temperature_K")]
    temperature: f64,
    ln_gamma_inf: f64,
    gamma_inf: f64,
    /// Outside the training temperature range of at least one member.
    extrapolation: bool,
    /// Population standard deviation across ensemble members.
    spread: Option<f64>,
    members: usize,
}

fn cmd_predict(ctx: &Context, model: &Path, rows: Vec<PredictRow>) -> CliResult {
    let (ensemble, is_ensemble) = load_predictor(model)?;
    let mut graphs = GraphCache::new();
    let mut records = Vec::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        if !(row.temperature.is_finite() && row.temperature > 0.0) {
            return Err(CliError::Input(format!(
                "row {}: temperature must be a positive number of kelvin, got {}",
                i + 1,
                row.temperature
            )));
        }
        for s in [&row.cation_smiles, &row.anion_smiles, &row.solute_smiles] {
            graphs.insert(s)?;
        }
        records.push(DataRecord {
            cation_smiles: row.cation_smiles,
            anion_smiles: row.anion_smiles,
            solute_smiles: row.solute_smiles,
            temperature: row.temperature,
            ln_gamma: f64::NAN,
            solute_family: row.solute_family,
            cation_family: row.cation_family,
        });
    }
    let refs: Vec<&DataRecord> = records.iter().collect();
    let predictions = ensemble.predict(&graphs, &refs)?;
    let scales: Vec<TemperatureScale> = ensemble.members.iter().map(|m| m.manifest.temperature).collect();
    let outputs: Vec<PredictOutput> = records
        .iter()
        .zip(predictions)
        .map(|(r, p)| PredictOutput {
            cation_smiles: r.cation_smiles.clone(),
            anion_smiles: r.anion_smiles.clone(),
            solute_smiles: r.solute_smiles.clone(),
            temperature: r.temperature,
            ln_gamma_inf: p.mean,
            gamma_inf: p.mean.exp(),
            extrapolation: scales.iter().any(|s| s.is_extrapolation(r.temperature)),
            spread: is_ensemble.then_some(p.std),
            members: p.members.len(),
        })
        .collect();
    let value = if outputs.len() == 1 { json!(outputs[0]) } else { json!(outputs) };
    ctx.emit(&value, || {
        let mut s = format!(
            "{:>4} {:>9} {:>12} {:>12} {:>10} {:>6}\n",
            "row", "T/K", "ln_gamma", "gamma", "spread", "extrap"
        );
        for (i, o) in outputs.iter().enumerate() {
            let spread = o.spread.map_or("-".to_string(), |v| format!("{v:.5}"));
            let _ = writeln!(
                s,
                "{:>4} {:>9.2} {:>12.5} {:>12.5} {:>10} {:>6}",
                i + 1,
                o.temperature,
                o.ln_gamma_inf,
                o.gamma_inf,
                spread,
                if o.extrapolation { "yes" } else { "no" }
            );
        }
        s
    });
    Ok(())
}

fn cmd_evaluate(
    ctx: &Context,
    data: Option<PathBuf>,
    model: &Path,
    splits: Option<&Path>,
    subset: Subset,
    parity: Option<&Path>,
    svg: Option<&Path>,
) -> CliResult {
    let resolved = ctx.resolve(&[])?;
    let (ensemble, _) = load_predictor(model)?;
    let data = ctx.load_data(data)?;
    let indices = match (splits, subset) {
        (Some(p), _) => {
            let s = load_splits(p, &data)?;
            match subset {
                Subset::Train => s.train,
                Subset::Val => s.val,
                Subset::Test => s.test,
                Subset::All => (0..data.len()).collect(),
            }
        }
        (None, Subset::All) => (0..data.len()).collect(),
        (None, Subset::Test) if !ensemble.test.is_empty() => ensemble.test.clone(),
        (None, _) => {
            return Err(CliError::Input(
                "--splits is required unless evaluating an ensemble on its recorded test set".into(),
            ))
        }
    };
    if let Some(&bad) = indices.iter().find(|&&i| i >= data.len()) {
        return Err(CliError::Input(format!("record index {bad} is beyond the dataset")));
    }
    let refs = data.select(&indices);
    let means: Vec<f64> = ensemble.predict(&data.graphs, &refs)?.into_iter().map(|p| p.mean).collect();
    let report = MetricReport::compute(&means, &refs)?;
    if let Some(csv_path) = parity {
        export_parity(&means, &refs, csv_path, svg)?;
        resolved.save(&sidecar(csv_path))?;
    } else if let Some(svg_path) = svg {
        let targets: Vec<f64> = refs.iter().map(|r| r.ln_gamma).collect();
        std::fs::write(svg_path, ilgamma_core::evaluate::parity_svg(&means, &targets))
            .map_err(|e| io_error(svg_path, e))?;
    }
    ctx.emit(&json!(report), || report.to_table());
    Ok(())
}

fn cmd_featurize(ctx: &Context, smiles: &str, out: Option<&Path>) -> CliResult {
    let graph = featurize_smiles(smiles)?;
    let csv_error = |e: csv::Error| CliError::Internal(format!("cannot write features: {e}"));
    if let Some(path) = out {
        let file = File::create(path).map_err(|e| io_error(path, e))?;
        write_feature_csv(&graph, BufWriter::new(file)).map_err(csv_error)?;
        ctx.resolve(&[])?.save(&sidecar(path))?;
    }
    if ctx.json {
        let nodes: Vec<&[f64]> = (0..graph.num_nodes).map(|i| graph.node_features.row(i)).collect();
        let edges: Vec<Value> = graph
            .edge_index
            .iter()
            .enumerate()
            .map(|(k, (s, t))| json!({"source": s, "target": t, "features": graph.edge_features.row(k)}))
            .collect();
        let value = json!({
            "smiles": smiles,
            "node_feature_names": NODE_FEATURE_NAMES,
            "edge_feature_names": EDGE_FEATURE_NAMES,
            "nodes": nodes,
            "edges": edges,
        });
        println!("{}", serde_json::to_string_pretty(&value).expect("features serialize"));
    } else if out.is_none() {
        write_feature_csv(&graph, std::io::stdout().lock()).map_err(csv_error)?;
    }
    Ok(())
}

fn cmd_inspect(ctx: &Context, path: &Path) -> CliResult {
    let artifact = ModelArtifact::load(path)?;
    let m = &artifact.manifest;
    let counted = artifact.model.params().num_scalars();
    if counted != m.parameter_count {
        return Err(CliError::Input(format!(
            "manifest claims {} parameters but the file holds {counted}",
            m.parameter_count
        )));
    }
    let model_config = match &m.model {
        ilgamma_core::artifact::ModelSpec::Gnn { config } => json!(config),
        ilgamma_core::artifact::ModelSpec::Mcm { config, .. } => json!(config),
    };
    let kind = artifact.kind();
    let key = match kind {
        ModelKind::Gnn => "gnn",
        ModelKind::Mcm => "mcm",
    };
    let mut run_config = json!({ "model": kind, key: model_config });
    if let Some(t) = &m.train_config {
        run_config["train"] = json!(t);
    }
    let value = json!({
        "file": path,
        "checksum": "verified",
        "kind": kind,
        "featurizer_version": m.featurizer_version,
        "parameter_count": counted,
        "temperature_range_K": [m.temperature.t_min, m.temperature.t_max],
        "seed": m.seed,
        "run_config": run_config,
    });
    ctx.emit(&value, || {
        let mut rows = vec![
            ("file", path.display().to_string()),
            ("checksum", "verified".to_string()),
            ("kind", key.to_string()),
            ("featurizer", m.featurizer_version.clone()),
            ("parameters", counted.to_string()),
            ("T range / K", format!("{} .. {}", m.temperature.t_min, m.temperature.t_max)),
            ("seed", m.seed.to_string()),
            ("config", model_config.to_string()),
        ];
        if let Some(t) = &m.train_config {
            rows.push(("training", json!(t).to_string()));
        }
        kv_table(&rows)
    });
    Ok(())
}
