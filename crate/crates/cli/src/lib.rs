//! The `nocturne` command line. `main` is a thin wrapper over [`run`], so
//! tests can drive every command in-process.

// Validation uses `!(x > 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod manifest;
pub mod plot;

use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nocturne::eval::Scorer;
use nocturne::features::FeatureSetName;
use nocturne::models::ModelKind;
use thiserror::Error;

use crate::config::Config;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration; exit code 2.
    #[error("config field `{path}`: {message}")]
    Schema { path: String, message: String },
    /// Bad invocation or unreadable config; exit code 2.
    #[error("{0}")]
    Usage(String),
    /// A pipeline stage failed; exit code 1.
    #[error("stage `{stage}` failed: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } | CliError::Usage(_) => 2,
            CliError::Stage { .. } => 1,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> CliError {
        CliError::Stage {
            stage: "io",
            message: format!("{}: {e}", path.display()),
        }
    }
}

/// Maps any error into a failure of `stage`.
pub fn stage<E: Display>(stage: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::Stage {
        stage,
        message: e.to_string(),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "nocturne",
    version,
    about = "Nocturnal hypoglycemia prediction pipeline"
)]
pub struct Cli {
    /// Seed for data generation; overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Configuration file (TOML).
    #[arg(long, global = true, env = "NOCTURNE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Worker threads for folds, seeds and trees.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// Where a command reads its cohort from. Without any of these flags the
/// config's `[data]` section applies.
#[derive(Debug, Clone, Default, Args)]
pub struct InputArgs {
    /// CSV bundle directory.
    #[arg(long, conflicts_with_all = ["ohio", "profile"])]
    pub bundle: Option<PathBuf>,
    /// Ohio XML file or directory of `*-train.xml` / `*-test.xml`.
    #[arg(long, conflicts_with = "profile")]
    pub ohio: Option<PathBuf>,
    /// Generate a synthetic cohort with this profile.
    #[arg(long)]
    pub profile: Option<String>,
    /// Night signal strength for synthetic cohorts.
    #[arg(long)]
    pub signal: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Balanced matrix projected on two principal components.
    PcaScatter,
    /// Mean AUROC per model across feature sets.
    AurocDistribution,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic cohort as a CSV bundle.
    Generate {
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        signal: Option<f64>,
        /// Also write one Ohio-style XML file per patient.
        #[arg(long)]
        ohio_xml: bool,
    },
    /// Parse input data and write it back as a canonical CSV bundle.
    Ingest {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Label every night of a cohort.
    Label {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Build feature matrices, or print the feature-set registry.
    Features {
        #[command(flatten)]
        input: InputArgs,
        /// Feature set; repeat for several. Defaults to `features.sets`.
        #[arg(long = "set")]
        sets: Vec<FeatureSetName>,
        /// Print the channels and aggregates of each set instead.
        #[arg(long)]
        dump_spec: bool,
    },
    /// Standardize and ADASYN-balance one feature matrix.
    Balance {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long = "set", default_value = "GLUCOSE_PERSONALIZED")]
        set: FeatureSetName,
        /// Minority:majority ratio after balancing.
        #[arg(long)]
        ratio: Option<f64>,
        /// Neighbours considered per minority row.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Fit one model on every night and save it.
    Train {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long = "set", default_value = "GLUCOSE_PERSONALIZED")]
        set: FeatureSetName,
        #[arg(long, default_value = "rfc")]
        model: ModelKind,
    },
    /// Cross-validate models over feature sets.
    Evaluate {
        #[command(flatten)]
        input: InputArgs,
        /// Feature set; repeat for several. Defaults to `features.sets`.
        #[arg(long = "set")]
        sets: Vec<FeatureSetName>,
        /// Model or diagnostic scorer; repeat for several.
        #[arg(long = "model")]
        models: Vec<Scorer>,
        /// Keep each patient's nights in a single fold.
        #[arg(long)]
        group_by_patient: bool,
        /// Oversample before splitting (leakage studies only).
        #[arg(long)]
        leaky_balance: bool,
    },
    /// Pretrain a glucose LSTM on a source cohort and fine-tune on the target.
    Transfer {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, conflicts_with_all = ["source_ohio", "source_profile"])]
        source_bundle: Option<PathBuf>,
        #[arg(long, conflicts_with = "source_profile")]
        source_ohio: Option<PathBuf>,
        #[arg(long)]
        source_profile: Option<String>,
    },
    /// Render a figure as SVG plus the plotted numbers as CSV.
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// `balanced.csv` from `balance`, or `summary.csv` from `evaluate`.
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the stages named in the config, end to end.
    Pipeline {
        /// Config file; falls back to `--config` / `NOCTURNE_CONFIG`.
        config_file: Option<PathBuf>,
    },
}

/// Everything a command needs after flags and config are merged.
pub struct Context {
    pub cfg: Config,
    pub out: PathBuf,
    pub command_line: String,
}

const DEFAULT_OUT: &str = "nocturne-out";

fn resolve(cli: &Cli, explicit_config: Option<&PathBuf>) -> Result<Context, CliError> {
    let path = explicit_config.or(cli.config.as_ref());
    let mut cfg = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.run.workers = Some(w);
    }
    if let Some(o) = &cli.out {
        cfg.run.out = Some(o.clone());
    }
    cfg.validate()?;
    let out = cfg
        .run
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    Ok(Context {
        cfg,
        out,
        command_line: String::new(),
    })
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli, &args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, args: &[OsString]) -> Result<(), CliError> {
    let explicit = match &cli.command {
        Command::Pipeline { config_file } => config_file.as_ref(),
        _ => None,
    };
    if matches!(cli.command, Command::Pipeline { .. }) && explicit.is_none() && cli.config.is_none()
    {
        return Err(CliError::Usage(
            "pipeline needs a config file (argument, --config or NOCTURNE_CONFIG)".into(),
        ));
    }
    let mut ctx = resolve(cli, explicit)?;
    ctx.command_line = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let workers = ctx
        .cfg
        .run
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(stage("workers"))?;
    pool.install(|| commands::dispatch(&cli.command, &ctx))
}
