mod commands;
mod config;
mod export;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sg_sampling::Normalization;

use crate::config::{Format, RunConfig};

/// Average-value sampling on the Sierpinski gasket.
#[derive(Debug, Parser)]
#[command(name = "sgsample", version)]
struct Cli {
    /// Flat key = value configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output format.
    #[arg(long = "out", global = true, value_enum)]
    format: Option<Format>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    eigen_tol: Option<f64>,
    #[arg(long, global = true)]
    spectrum_tol: Option<f64>,
    #[arg(long, global = true)]
    gap_tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphName {
    Beta,
    Gamma,
    Zeta,
    Xi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Plain,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisKind {
    Gamma,
    Beta,
    Bandlimited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormChoice {
    A,
    B,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Export a graph approximation (json or svg).
    Graph {
        #[arg(long, value_enum, default_value = "beta")]
        graph: GraphName,
        #[arg(long)]
        level: Option<usize>,
    },
    /// Dense spectrum of a graph Laplacian.
    Spectrum {
        #[arg(long, value_enum, default_value = "gamma")]
        graph: GraphName,
        #[arg(long)]
        level: Option<usize>,
        /// Defaults to neumann on vertex graphs and plain on cell graphs.
        #[arg(long, value_enum)]
        convention: Option<ConventionArg>,
    },
    /// Build and verify an eigenbasis.
    Basis {
        #[arg(long, value_enum, default_value = "gamma")]
        kind: BasisKind,
        #[arg(long)]
        level: Option<usize>,
    },
    /// Sampling function of one cell.
    Sample {
        /// Cell address, e.g. 0,1,2
        #[arg(long)]
        word: String,
        #[arg(long)]
        norm: Option<Normalization>,
        /// Quadrature level M (default m + 8).
        #[arg(long)]
        quad: Option<usize>,
    },
    /// Sampling-function statistics for every symmetry class of cells.
    Table1 {
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, value_enum, default_value = "b")]
        norm: NormChoice,
        /// Quadrature depth below the sampling level.
        #[arg(long, default_value_t = 8)]
        depth: usize,
    },
    /// Blowup sampling sequence metrics.
    Blowup {
        #[arg(long)]
        word: String,
        /// Digits i_1, i_2, ... of the blowup sequence.
        #[arg(long)]
        seq: String,
        #[arg(long, default_value_t = 3)]
        stages: usize,
        #[arg(long)]
        norm: Option<Normalization>,
        #[arg(long, default_value_t = 8)]
        depth: usize,
    },
    /// SG₃ verification reports.
    Sg3 {
        #[command(subcommand)]
        action: Sg3Action,
    },
    /// Run the invariant suite; nonzero exit on any failure.
    Selftest,
}

#[derive(Debug, Subcommand)]
enum Sg3Action {
    Verify,
}

/// Why a run stopped: bad input (exit 2) or a violated numerical contract (exit 1).
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<sg_sampling::Error> for Failure {
    fn from(e: sg_sampling::Error) -> Self {
        use sg_sampling::Error as E;
        match e {
            E::DigitOutOfRange { .. }
            | E::InvalidArgument(_)
            | E::UnknownCell(_)
            | E::CapacityCap { .. }
            | E::SizeCap { .. }
            | E::LevelMismatch { .. }
            | E::UnsupportedGraph(_) => Failure::Usage(e.to_string()),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(Failure::Usage)?,
        None => RunConfig::default(),
    };
    if let Some(j) = cli.jobs {
        config.jobs = Some(j);
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(f) = cli.format {
        config.format = Some(f);
    }
    if let Some(o) = &cli.output {
        config.output = Some(o.clone());
    }
    for (name, flag, slot) in [
        ("eigen_tol", cli.eigen_tol, &mut config.eigen_tol),
        ("spectrum_tol", cli.spectrum_tol, &mut config.spectrum_tol),
        ("gap_tol", cli.gap_tol, &mut config.gap_tol),
    ] {
        if let Some(v) = flag {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Failure::Usage(format!("{name} must be positive")));
            }
            *slot = v;
        }
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = build_config(&cli)?;
    if let Some(jobs) = config.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Graph { graph, level } => commands::graph(&config, graph, level),
        Command::Spectrum {
            graph,
            level,
            convention,
        } => commands::spectrum(&config, graph, level, convention),
        Command::Basis { kind, level } => commands::basis(&config, kind, level),
        Command::Sample { word, norm, quad } => commands::sample(&config, &word, norm, quad),
        Command::Table1 {
            levels,
            norm,
            depth,
        } => commands::table1(&config, levels, norm, depth),
        Command::Blowup {
            word,
            seq,
            stages,
            norm,
            depth,
        } => commands::blowup(&config, &word, &seq, stages, norm, depth),
        Command::Sg3 {
            action: Sg3Action::Verify,
        } => commands::sg3_verify(&config),
        Command::Selftest => selftest::run(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical check failed: {msg}");
            ExitCode::from(1)
        }
    }
}
