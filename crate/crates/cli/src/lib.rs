//! Command-line front end: run configuration, subcommands and file output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use iga_motor::optimize::Mode;

use config::{AngleSpec, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "iga-motor",
    version,
    about = "IGA magnetostatics and design optimization of a PM machine"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (JSON); built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Rotation angles in degrees, `a,b,c` or `start:stop[:step]`.
    #[arg(long, global = true)]
    pub angles: Option<String>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Param,
    Shape,
    Sequential,
    Combined,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Param => Mode::Parameters,
            ModeArg::Shape => Mode::Shape,
            ModeArg::Sequential => Mode::Sequential,
            ModeArg::Combined => Mode::Combined,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Torque sweep, field samples and summary.
    Evaluate,
    /// Mean-torque gradient against finite differences.
    Gradcheck {
        /// Difference step in scaled design coordinates.
        #[arg(long)]
        fd_step: Option<f64>,
        /// Perturb the analytic gradient (exercises the failure path).
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Augmented-Lagrangian design optimization.
    Optimize {
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Reloadable geometry block and the multipatch domain.
    ExportGeometry,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("thread count must be positive".into()));
        }
        // a pool that already exists is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (mut config, base) = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    if let Some(a) = &cli.angles {
        config.angles_deg = Some(AngleSpec::parse(a)?);
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(|d| base.join(d)))
        .unwrap_or_else(|| PathBuf::from("."));
    let run = config.resolve(&base)?;
    match cli.command {
        Command::Evaluate => commands::evaluate(&run, &out),
        Command::Gradcheck {
            fd_step,
            corrupt_gradient,
        } => commands::gradcheck(&run, &out, fd_step, corrupt_gradient).map(|_| ()),
        Command::Optimize { mode } => commands::optimize_run(&run, &out, mode.map(Mode::from)),
        Command::ExportGeometry => commands::export_geometry(&run, &out),
    }
}
