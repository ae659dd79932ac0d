//! Command-line front end for the crop yield pipeline.
//!
//! Every subcommand resolves one [`Config`] (flags over config file over
//! defaults), logs it, and writes its outputs into the `--out` directory.

pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use agroyield_core::baselines::{Method, Model};
use agroyield_core::error::{EvalError, IngestError, ModelError, NnError, PipelineError};
use agroyield_core::eval::{emit_plot_data, evaluate, select_crop, Metrics, PlotKind};
use agroyield_core::ingest::{clean, parse_csv, split, Dataset, SplitConfig};
use agroyield_core::pipeline::{prepare_crop, run_report, train_method};
use agroyield_core::rng::derive_seed;
use agroyield_core::synthgen::{generate, ResponseSet};
use agroyield_core::Crop;
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;
use thiserror::Error;

pub use config::{load_config, Config, ConfigError, Overrides};

/// Process exit codes; stable across releases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Usage = 1,
    Data = 2,
    Training = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Training(NnError),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Usage(_) | CliError::Config(_) => ExitStatus::Usage,
            CliError::Data(_) => ExitStatus::Data,
            CliError::Training(_) => ExitStatus::Training,
        }
    }
}

fn data_err(context: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{context}: {e}"))
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Network(n @ NnError::DivergedLoss { .. }) => CliError::Training(n),
            ModelError::Network(NnError::InvalidConfig(m) | NnError::InvalidArchitecture(m))
            | ModelError::InvalidHyperparameter(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::InvalidRatio(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(m) => m.into(),
            EvalError::Ingest(i) => i.into(),
            EvalError::MissingCropModel(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Ingest(i) => i.into(),
            PipelineError::Model(m) => m.into(),
            PipelineError::Eval(v) => v.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "agroyield", version, about = "Crop yield prediction: data, models, reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// JSON config file; command-line flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Global seed (falls back to the config file, then AGROYIELD_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct Tuning {
    /// Train fraction of each crop's records.
    #[arg(long)]
    ratio: Option<f64>,
    /// DNN epoch limit.
    #[arg(long)]
    epochs: Option<usize>,
    /// DNN learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Random forest size.
    #[arg(long)]
    trees: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Number of records.
        #[arg(long)]
        n: Option<usize>,
        /// Exactly one record per (district, year, crop).
        #[arg(long)]
        coverage: bool,
        /// Crop response presets (JSON); the shipped presets by default.
        #[arg(long)]
        responses: Option<PathBuf>,
    },
    /// Remove duplicates and invalid rows.
    Clean {
        #[command(flatten)]
        common: Common,
        /// Input CSV (falls back to the config file's `data`).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Fit one model for one crop.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tuning: Tuning,
        /// Input CSV (falls back to the config file's `data`).
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_parser = parse_method)]
        model: Method,
        #[arg(long, value_parser = parse_crop)]
        crop: Crop,
    },
    /// Score model files on the held-out part of a dataset.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Input CSV (falls back to the config file's `data`).
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(required = true)]
        models: Vec<PathBuf>,
    },
    /// Train and compare all four methods for every crop.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tuning: Tuning,
        /// Input CSV (falls back to the config file's `data`).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Write the per-district series behind the weather and yield plots.
    PlotData {
        #[command(flatten)]
        common: Common,
        /// Input CSV (falls back to the config file's `data`).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Recommend the highest-yielding crop for each record.
    Select {
        #[command(flatten)]
        common: Common,
        /// Input CSV (falls back to the config file's `data`).
        #[arg(long)]
        data: Option<PathBuf>,
        /// One model file per crop.
        #[arg(required = true)]
        models: Vec<PathBuf>,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
        .map_err(|_: ModelError| format!("unknown model {s:?}; expected dnn, svm, forest or logistic"))
}

fn parse_crop(s: &str) -> Result<Crop, String> {
    s.parse().map_err(|e: agroyield_core::SchemaError| e.to_string())
}

/// Parses `argv` (program name first), runs the subcommand and reports
/// failures on stderr.
pub fn run<I, T>(argv: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitStatus::Usage } else { ExitStatus::Success };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitStatus::Success,
        Err(e) => {
            eprintln!("error: {e}");
            e.status()
        }
    }
}

fn resolve(common: &Common, mut flags: Overrides) -> Result<Config, CliError> {
    let file = match &common.config {
        Some(path) => load_config(path)?,
        None => Config::default(),
    };
    flags.seed = common.seed;
    flags.out = common.out.clone();
    let env = std::env::var(config::SEED_ENV).ok();
    let cfg = file.resolve(&flags, env.as_deref())?;
    info!("seed {}", cfg.seed());
    info!("effective config {}", cfg.to_json());
    Ok(cfg)
}

fn tuning_overrides(t: &Tuning) -> Overrides {
    Overrides {
        ratio: t.ratio,
        epochs: t.epochs,
        lr: t.lr,
        trees: t.trees,
        ..Overrides::default()
    }
}

fn data_path(cfg: &Config) -> Result<&Path, CliError> {
    cfg.data
        .as_deref()
        .ok_or_else(|| CliError::Usage("no input data: pass --data or set `data` in the config".into()))
}

fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|e| data_err(path.display(), e))?;
    parse_csv(file, &path.display().to_string()).map_err(|e| data_err(path.display(), e))
}

/// Parsed and cleaned input; dropped rows are logged, not fatal.
fn load_clean(cfg: &Config) -> Result<Dataset, CliError> {
    let ds = clean(read_dataset(data_path(cfg)?)?);
    if !ds.cleaning_log.is_empty() {
        info!("dropped {} rows while cleaning", ds.cleaning_log.len());
    }
    if ds.is_empty() {
        return Err(CliError::Data("no usable records in input".into()));
    }
    Ok(ds)
}

fn prepare_out(cfg: &Config) -> Result<PathBuf, CliError> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).map_err(|e| data_err(dir.display(), e))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| data_err(path.display(), e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| data_err(path.display(), e))?;
    println!("{}", path.display());
    Ok(())
}

fn crop_key(crop: Crop) -> String {
    format!("{crop:?}").to_lowercase()
}

fn load_model(path: &Path) -> Result<Model, CliError> {
    let text = fs::read_to_string(path).map_err(|e| data_err(path.display(), e))?;
    Model::from_json(&text).map_err(|e| data_err(path.display(), e))
}

/// Writes a model and, for the network, its loss curve.
fn save_model(dir: &Path, crop: Crop, method: Method, trained: &agroyield_core::pipeline::TrainedModel) -> Result<(), CliError> {
    let stem = format!("{}_{}", crop_key(crop), method.key());
    write_text(&dir.join(format!("{stem}.json")), &trained.model.to_json())?;
    if let Some(history) = &trained.loss_history {
        let path = dir.join(format!("{stem}_loss.csv"));
        history.write_csv(create(&path)?).map_err(|e| data_err(path.display(), e))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate { common, n, coverage, responses } => {
            let flags = Overrides { n, responses, ..Overrides::default() };
            let mut cfg = resolve(&common, flags)?;
            if coverage {
                let size = cfg.generate.coverage_size();
                if n.is_some_and(|n| n != size) {
                    return Err(CliError::Usage(format!("--coverage needs exactly {size} records")));
                }
                cfg.generate.n_records = size;
            }
            cfg.generate.seed = derive_seed(cfg.seed(), "synthgen");
            let presets = match &cfg.responses {
                Some(path) => ResponseSet::load(path).map_err(|e| data_err(path.display(), e))?,
                None => ResponseSet::shipped(),
            };
            let ds = generate(&cfg.generate, &presets).map_err(|e| CliError::Usage(e.to_string()))?;
            let dir = prepare_out(&cfg)?;
            let path = dir.join("synthetic.csv");
            ds.write_csv(create(&path)?).map_err(|e| data_err(path.display(), e))?;
            println!("{}", path.display());
            info!("wrote {} records", ds.len());
        }
        Command::Clean { common, data } => {
            let cfg = resolve(&common, Overrides { data, ..Overrides::default() })?;
            let ds = clean(read_dataset(data_path(&cfg)?)?);
            let dir = prepare_out(&cfg)?;
            let csv = dir.join("cleaned.csv");
            ds.write_csv(create(&csv)?).map_err(|e| data_err(csv.display(), e))?;
            let log = dir.join("cleaning_log.jsonl");
            ds.write_cleaning_log(create(&log)?).map_err(|e| data_err(log.display(), e))?;
            println!("{}\n{}", csv.display(), log.display());
            info!("kept {} records, dropped {}", ds.len(), ds.cleaning_log.len());
        }
        Command::Train { common, tuning, data, model, crop } => {
            let cfg = resolve(&common, Overrides { data, ..tuning_overrides(&tuning) })?;
            let ds = load_clean(&cfg)?;
            let split = prepare_crop(&ds, crop, cfg.train_ratio, cfg.seed())?;
            let trained = train_method(model, &split, &cfg.models, cfg.seed())?;
            let dir = prepare_out(&cfg)?;
            save_model(&dir, crop, model, &trained)?;
        }
        Command::Evaluate { common, data, models } => {
            let cfg = resolve(&common, Overrides { data, ..Overrides::default() })?;
            let ds = load_clean(&cfg)?;
            let mut results = Vec::new();
            for path in &models {
                let model = load_model(path)?;
                let test = holdout(&ds, &model)?;
                let metrics = evaluate(&model, &test)?;
                results.push(Evaluation {
                    model: path.display().to_string(),
                    crop: model.crop,
                    method: model.method().display_name(),
                    metrics,
                });
            }
            let dir = prepare_out(&cfg)?;
            let json = serde_json::to_string_pretty(&results).expect("evaluation serializes");
            write_text(&dir.join("evaluation.json"), &json)?;
        }
        Command::Report { common, tuning, data } => {
            let cfg = resolve(&common, Overrides { data, ..tuning_overrides(&tuning) })?;
            let ds = load_clean(&cfg)?;
            let output = run_report(&ds, &cfg.models, cfg.train_ratio, cfg.seed())?;
            let dir = prepare_out(&cfg)?;
            write_text(&dir.join("report.md"), &output.report.to_markdown())?;
            write_text(&dir.join("report.json"), &output.report.to_json())?;
            let model_dir = dir.join("models");
            fs::create_dir_all(&model_dir).map_err(|e| data_err(model_dir.display(), e))?;
            for (crop, method, trained) in &output.models {
                save_model(&model_dir, *crop, *method, trained)?;
            }
        }
        Command::PlotData { common, data } => {
            let cfg = resolve(&common, Overrides { data, ..Overrides::default() })?;
            let ds = load_clean(&cfg)?;
            let dir = prepare_out(&cfg)?;
            for kind in PlotKind::ALL {
                let series = emit_plot_data(&ds, kind)?;
                let path = dir.join(format!("plot_{}.csv", kind.key()));
                series.write_csv(create(&path)?).map_err(|e| data_err(path.display(), e))?;
                println!("{}", path.display());
            }
        }
        Command::Select { common, data, models } => {
            let cfg = resolve(&common, Overrides { data, ..Overrides::default() })?;
            let ds = load_clean(&cfg)?;
            let mut by_crop = BTreeMap::new();
            for path in &models {
                let model = load_model(path)?;
                let crop = model
                    .crop
                    .ok_or_else(|| CliError::Usage(format!("{} has no crop tag", path.display())))?;
                if by_crop.insert(crop, model).is_some() {
                    return Err(CliError::Usage(format!("two models given for {crop}")));
                }
            }
            let picks = ds
                .records
                .iter()
                .map(|r| select_crop(&by_crop, r))
                .collect::<Result<Vec<_>, _>>()?;
            let dir = prepare_out(&cfg)?;
            let json = serde_json::to_string_pretty(&picks).expect("selection serializes");
            write_text(&dir.join("selection.json"), &json)?;
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Evaluation {
    model: String,
    crop: Option<Crop>,
    method: &'static str,
    #[serde(flatten)]
    metrics: Metrics,
}

/// Records the model was not trained on: the test part of its recorded
/// split when the model carries one, otherwise every record of its crop.
fn holdout(ds: &Dataset, model: &Model) -> Result<Dataset, CliError> {
    let scoped = match model.crop {
        Some(crop) => ds.for_crop(crop),
        None => ds.clone(),
    };
    match model.training {
        Some(info) => {
            let cfg = SplitConfig { train_ratio: info.train_ratio, seed: info.split_seed };
            Ok(split(&scoped, &cfg)?.1)
        }
        None => Ok(scoped),
    }
}
