//! `regloss` command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::LevelFilter;
use serde::Serialize;
use serde_json::Value;

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod parse;

use config::RunRecord;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "regloss", version, about = "Online registration, loss kernels, 3D-PLI signal model and evaluation metrics")]
pub struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true, display_order = 900, env = "REGLOSS_THREADS")]
    pub threads: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, display_order = 900, default_value = "warn")]
    pub log_level: LevelFilter,
    /// JSON file overriding built-in defaults; flags override the file.
    #[arg(long, global = true, display_order = 900)]
    pub config: Option<PathBuf>,
    /// Where to write the run record (default: `<output>.run.json`).
    #[arg(long, global = true, display_order = 900)]
    pub sidecar: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rigid registration of a moving image against a fixed image.
    Register(commands::register::Args),
    /// Hit-rate sweep over additive Gaussian noise levels.
    SweepNoise(commands::sweep::Args),
    /// Hit-rate sweep over Gaussian blur levels.
    SweepBlur(commands::sweep::Args),
    /// Reconstruction, style and equivariance losses.
    Loss(commands::loss::Args),
    /// RMSE, SSIM and mutual information between two images.
    Metrics(commands::metrics::Args),
    /// Instance matching F1, overall and by cell size.
    MatchCells(commands::cells::Args),
    /// Gray level index image and laminar profiles.
    Gli(commands::gli::Args),
    /// 3D-PLI signal model.
    #[command(subcommand)]
    Pli(commands::pli::Command),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Register(_) => "register",
            Command::SweepNoise(_) => "sweep-noise",
            Command::SweepBlur(_) => "sweep-blur",
            Command::Loss(_) => "loss",
            Command::Metrics(_) => "metrics",
            Command::MatchCells(_) => "match-cells",
            Command::Gli(_) => "gli",
            Command::Pli(p) => p.name(),
        }
    }
}

/// Invocation-wide state handed to every subcommand.
pub struct Context {
    pub subcommand: &'static str,
    pub overrides: Option<Value>,
    pub config_file: Option<PathBuf>,
    pub sidecar: Option<PathBuf>,
}

impl Context {
    pub fn record(&self, settings: &impl Serialize) -> CliResult<RunRecord> {
        let mut r = RunRecord::new(self.subcommand, settings)?;
        r.config_file = self.config_file.clone();
        Ok(r)
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let threads = match cli.threads {
        Some(0) => return Err(CliError::flags("--threads must be at least 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::io(format!("cannot start thread pool: {e}")))?;
    let ctx = Context {
        subcommand: cli.command.name(),
        overrides: config::load_overrides(cli.config.as_deref())?,
        config_file: cli.config.clone(),
        sidecar: cli.sidecar.clone(),
    };
    log::debug!("{} on {threads} threads", ctx.subcommand);
    pool.install(|| match cli.command {
        Command::Register(a) => commands::register::run(&ctx, a),
        Command::SweepNoise(a) => commands::sweep::run(&ctx, a, regloss_core::bench::Degradation::Noise),
        Command::SweepBlur(a) => commands::sweep::run(&ctx, a, regloss_core::bench::Degradation::Blur),
        Command::Loss(a) => commands::loss::run(&ctx, a),
        Command::Metrics(a) => commands::metrics::run(&ctx, a),
        Command::MatchCells(a) => commands::cells::run(&ctx, a),
        Command::Gli(a) => commands::gli::run(&ctx, a),
        Command::Pli(c) => commands::pli::run(&ctx, c),
    })
}

/// Parses `args` (program name first), runs the subcommand and maps the
/// outcome to the documented exit codes.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(error::Kind::Flags.exit_code()),
            };
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .try_init();
    log::set_max_level(cli.log_level);
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
