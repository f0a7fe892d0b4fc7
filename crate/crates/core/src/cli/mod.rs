//! Command-line runs: dataset generation, training, completion, evaluation,
//! noise sweeps, latent interpolation and the latent probe.
//!
//! Every command writes into one run directory: `config.txt` (the effective
//! configuration), `seed.txt`, `version.txt`, and its own artifacts. The
//! directory is `--out`, else `$SHAPE_INPAINT_OUT/<command>`, else
//! `runs/<command>`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error
//! (missing or malformed files), 3 numeric failure during training.

mod config;
mod output;

pub use config::{parse_config, ConfigError, DataSettings, EvalSettings, Settings};
pub use output::{emit_report, pgm_slice, write_slices, ReportFormat};

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::data::{build_dataset, DataError, Dataset, DatasetSpec, Split, MANIFEST_NAME};
use crate::eval::{evaluate, extract_latents, interpolate_latent, linear_probe, noise_sweep, shuffled_baseline, EvalError};
use crate::nets::{hybrid_forward, HybridModel, NetError, THRESHOLD};
use crate::train::{Stage, TrainError, TrainLog, Trainer};
use crate::voxel::{read_grid, write_grid, VoxelError, VoxelGrid};

pub const OUT_ENV: &str = "SHAPE_INPAINT_OUT";
pub const CONFIG_FILE: &str = "config.txt";
pub const MODEL_DIR: &str = "model";
pub const TRAIN_LOG: &str = "train.log";

/// Package version and the `git describe` output at build time.
pub fn version() -> String {
    format!("{} ({})", env!("CARGO_PKG_VERSION"), env!("SHAPE_INPAINT_GIT"))
}

#[derive(Debug, Parser)]
#[command(name = "shape-inpaint", version, about = "Volumetric shape completion and upsampling")]
pub struct Cli {
    #[command(flatten)]
    pub run: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunConfig {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one key; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Run directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Shorthand for `--set seed=N`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a procedural dataset and its manifest.
    GenData,
    /// Train all stages, or one of 1, 1a, 1b, 2, 3.
    Train {
        /// Dataset directory or manifest.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "all")]
        stage: String,
        /// Model directory to start from instead of a fresh init.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Complete one low-resolution voxel file.
    Complete {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Also dump every x-slice as a PGM image.
        #[arg(long)]
        slices: bool,
    },
    /// Score the test split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        format: ReportFormat,
    },
    /// Score the test split under increasing random deletion.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        format: ReportFormat,
    },
    /// Decode convex combinations of two shapes' latent codes.
    Interpolate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Linear probe of category from latent codes.
    Probe {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Train { .. } => "train",
            Command::Complete { .. } => "complete",
            Command::Eval { .. } => "eval",
            Command::Sweep { .. } => "sweep",
            Command::Interpolate { .. } => "interpolate",
            Command::Probe { .. } => "probe",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(format!("config: {e}"))
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}
data_error!(DataError, EvalError, NetError, VoxelError);

fn io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io(path, e))
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Resolves the settings of a run from its config file and overrides.
pub fn load_settings(run: &RunConfig) -> Result<Settings, CliError> {
    let text = match &run.config {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let mut overrides = run.overrides.clone();
    if let Some(seed) = run.seed {
        overrides.push(format!("seed={seed}"));
    }
    Ok(parse_config(text.as_deref(), &overrides)?)
}

pub fn run_dir(run: &RunConfig, command: &str) -> PathBuf {
    match (&run.out, std::env::var_os(OUT_ENV)) {
        (Some(out), _) => out.clone(),
        (None, Some(root)) => PathBuf::from(root).join(command),
        (None, None) => PathBuf::from("runs").join(command),
    }
}

/// Runs one command and returns its run directory.
pub fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let settings = load_settings(&cli.run)?;
    let out = run_dir(&cli.run, cli.command.name());
    fs::create_dir_all(&out).map_err(|e| io(&out, e))?;
    write(&out.join(CONFIG_FILE), &settings.to_text())?;
    write(&out.join("seed.txt"), &format!("{}\n", settings.train.seed))?;
    write(&out.join("version.txt"), &format!("{}\n", version()))?;

    match &cli.command {
        Command::GenData => gen_data(&settings, &out),
        Command::Train { data, stage, init } => train(&settings, &out, data, stage, init.as_deref()),
        Command::Complete { model, input, slices } => complete(&settings, &out, model, input, *slices),
        Command::Eval { model, data, format } => {
            let model = load_model(model, &settings)?;
            let ds = load_dataset(data)?;
            let report = evaluate(&model, &ds.test())?;
            print!("{}", report.to_text());
            emit_report(&report, *format, &out, "report")
        }
        Command::Sweep { model, data, format } => {
            let model = load_model(model, &settings)?;
            let ds = load_dataset(data)?;
            let report = noise_sweep(&model, &ds.test(), &settings.eval.fractions, settings.eval.noise_seed)?;
            print!("{}", report.to_text());
            emit_report(&report, *format, &out, "sweep")
        }
        Command::Interpolate { model, a, b } => interpolate(&settings, &out, model, a, b),
        Command::Probe { model, data } => probe(&settings, &out, model, data),
    }?;
    Ok(out)
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    let manifest = if path.is_dir() { path.join(MANIFEST_NAME) } else { path.to_path_buf() };
    if !manifest.is_file() {
        return Err(CliError::Data(format!("no manifest at {}", manifest.display())));
    }
    Ok(Dataset::load(&manifest)?)
}

/// Loads a model directory, taking its architecture from the directory's own
/// `config.txt` when present.
pub fn load_model(dir: &Path, settings: &Settings) -> Result<HybridModel, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Data(format!("no model directory at {}", dir.display())));
    }
    let cfg_path = dir.join(CONFIG_FILE);
    let arch = if cfg_path.is_file() {
        let text = fs::read_to_string(&cfg_path).map_err(|e| io(&cfg_path, e))?;
        parse_config(Some(&text), &[]).map_err(|e| CliError::Data(format!("{}: {e}", cfg_path.display())))?
    } else {
        settings.clone()
    };
    Ok(HybridModel::load(dir, arch.train.edgan, arch.train.lrcn)?)
}

fn save_model(model: &HybridModel, settings: &Settings, dir: &Path) -> Result<(), CliError> {
    model.save(dir)?;
    write(&dir.join(CONFIG_FILE), &settings.to_text())
}

fn gen_data(settings: &Settings, out: &Path) -> Result<(), CliError> {
    let spec = DatasetSpec {
        n: settings.data.n,
        categories: settings.data.categories.clone(),
        d_l: settings.train.edgan.d_l,
        d_h: settings.train.lrcn.d_h,
        corruption: settings.data.corruption,
        seed: settings.data.seed,
    };
    let manifest = build_dataset(&spec, out)?;
    println!("{}", manifest.display());
    Ok(())
}

fn stages(name: &str) -> Result<Vec<Stage>, CliError> {
    match name {
        "all" => Ok(Stage::ALL.to_vec()),
        "1" => Ok(vec![Stage::Reconstruction, Stage::Adversarial]),
        tag => tag
            .parse()
            .map(|s| vec![s])
            .map_err(|_| CliError::Usage(format!("unknown stage {tag:?}, expected all, 1, 1a, 1b, 2 or 3"))),
    }
}

fn train(settings: &Settings, out: &Path, data: &Path, stage: &str, init: Option<&Path>) -> Result<(), CliError> {
    let stages = stages(stage)?;
    let ds = load_dataset(data)?;
    let samples = ds.train();
    let model = match init {
        Some(dir) => load_model(dir, settings)?,
        None => HybridModel::init(settings.train.edgan, settings.train.lrcn, settings.train.seed)?,
    };
    let log_path = out.join(TRAIN_LOG);
    let sink = fs::File::create(&log_path).map_err(|e| io(&log_path, e))?;
    let mut trainer = Trainer::new(model, settings.train.clone())?.with_log(TrainLog::with_sink(Box::new(sink)));
    trainer.on_epoch(Box::new(|stage, epoch, loss| eprintln!("stage {stage} epoch {epoch} loss {loss:.6}")));
    for s in stages {
        trainer.run_stage(s, &samples)?;
    }
    let (model, log) = trainer.into_parts();
    save_model(&model, settings, &out.join(MODEL_DIR))?;
    println!("{} steps, model in {}", log.records.len(), out.join(MODEL_DIR).display());
    Ok(())
}

fn complete(settings: &Settings, out: &Path, model: &Path, input: &Path, slices: bool) -> Result<(), CliError> {
    let model = load_model(model, settings)?;
    let grid = read_grid(input)?;
    if grid.resolution() != model.edgan.d_l {
        return Err(CliError::Data(format!(
            "{} has resolution {}, the model expects {}",
            input.display(),
            grid.resolution(),
            model.edgan.d_l
        )));
    }
    let result = hybrid_forward(&model, &grid, THRESHOLD)?;
    let low = result.low.binarize(THRESHOLD);
    let high = result.high.binarize(THRESHOLD);
    write_grid(out.join("low.voxg"), &low)?;
    write_grid(out.join("high.voxg"), &high)?;
    if slices {
        write_slices(&low, &out.join("slices"), "low")?;
        write_slices(&high, &out.join("slices"), "high")?;
    }
    println!("low {} voxels, high {} voxels", low.count(), high.count());
    Ok(())
}

fn interpolate(settings: &Settings, out: &Path, model: &Path, a: &Path, b: &Path) -> Result<(), CliError> {
    let model = load_model(model, settings)?;
    let (a, b) = (read_grid(a)?, read_grid(b)?);
    let steps = interpolate_latent(&model, &a, &b, &settings.eval.gammas)?;
    let mut index = String::from("gamma\tfile\toccupied\n");
    for (i, step) in steps.iter().enumerate() {
        let name = format!("interp_{i:02}.voxg");
        write_grid(out.join(&name), &step.grid)?;
        index.push_str(&format!("{}\t{name}\t{}\n", step.gamma, step.grid.count()));
    }
    print!("{index}");
    write(&out.join("interpolation.tsv"), &index)
}

fn probe(settings: &Settings, out: &Path, model: &Path, data: &Path) -> Result<(), CliError> {
    let model = load_model(model, settings)?;
    let ds = load_dataset(data)?;
    let grids: Vec<&VoxelGrid> = ds.samples.iter().map(|s| &s.low).collect();
    let features = extract_latents(&model, &grids)?;
    let mut present: Vec<usize> = ds.samples.iter().map(|s| s.category.index()).collect();
    present.sort_unstable();
    present.dedup();
    let labels: Vec<usize> = ds
        .samples
        .iter()
        .map(|s| present.binary_search(&s.category.index()).unwrap_or(0))
        .collect();
    let train: Vec<bool> = ds.samples.iter().map(|s| s.split == Split::Train).collect();
    let cfg = &settings.eval.probe;
    let result = linear_probe(&features, &labels, &train, cfg)?;
    let baseline = shuffled_baseline(&features, &labels, &train, cfg, settings.eval.shuffles)?;
    let text = format!(
        "classes {}\ntrain_accuracy {}\ntest_accuracy {}\nshuffled_baseline {}\nratio {}\n",
        result.classes,
        result.train_accuracy,
        result.test_accuracy,
        baseline,
        result.test_accuracy / baseline
    );
    print!("{text}");
    write(&out.join("probe.txt"), &text)
}

#[cfg(test)]
mod tests;
