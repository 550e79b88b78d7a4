//! `delay-hopf`: equilibria, Hopf points, series, collocation and continuation
//! for the two-delay activator–inhibitor model.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use delay_hopf::model::Preset;

use config::{Coefficients, RawConfig, RawContinuation, RunConfig};

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<delay_hopf::Error> for Failure {
    fn from(e: delay_hopf::Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("output: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Config(format!("output: {e}"))
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "delay-hopf", version, about = "Hopf bifurcation and periodic-orbit toolkit for a two-delay activator-inhibitor model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON configuration file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Parameter preset: set1, set2 or set3.
    #[arg(long, global = true)]
    preset: Option<Preset>,
    /// Explicit coefficient `a` (requires --b and --c).
    #[arg(long, global = true, allow_hyphen_values = true, requires_all = ["b", "c"])]
    a: Option<f64>,
    /// Explicit coefficient `b`.
    #[arg(long, global = true, allow_hyphen_values = true, requires_all = ["a", "c"])]
    b: Option<f64>,
    /// Explicit coefficient `c`.
    #[arg(long, global = true, allow_hyphen_values = true, requires_all = ["a", "b"])]
    c: Option<f64>,
    /// Ratio of the second delay to the first.
    #[arg(long, global = true)]
    s0: Option<f64>,
    /// Equilibrium index in ascending order of u.
    #[arg(long, global = true)]
    equilibrium: Option<usize>,
    /// Upper end of the Hopf search window.
    #[arg(long, global = true)]
    gamma_max: Option<f64>,
    /// Hopf point index (ascending gamma0).
    #[arg(long, global = true)]
    hopf_index: Option<usize>,
    /// Collocation intervals.
    #[arg(long, global = true)]
    mesh_intervals: Option<usize>,
    /// Collocation polynomial degree.
    #[arg(long, global = true)]
    mesh_degree: Option<usize>,
    /// Amplitude parameter of the series (auto-selected where optional).
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Positive equilibria.
    Equilibria,
    /// Hopf points below gamma_max, with certification.
    Hopf,
    /// Per-order series table; requires --eps.
    Lindstedt {
        #[arg(long)]
        order: Option<usize>,
    },
    /// Collocation correction of the order-3 series guess.
    Correct,
    /// Pseudo-arclength continuation from each Hopf point.
    Continue {
        /// Worker threads for independent branches (0: all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        h0: Option<f64>,
        #[arg(long)]
        hmin: Option<f64>,
        #[arg(long)]
        hmax: Option<f64>,
        /// Lower gamma bound of the branch.
        #[arg(long)]
        branch_gamma_min: Option<f64>,
        /// Upper gamma bound of the branch.
        #[arg(long)]
        branch_gamma_max: Option<f64>,
        /// Write an orbit JSON every k-th point (0: none).
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
    /// Return-map errors of corrected orbits.
    Validate {
        #[arg(long)]
        integrator_step: Option<f64>,
    },
}

fn layered(cli: &Cli) -> Result<RawConfig, Failure> {
    let base = match &cli.common.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    let c = &cli.common;
    let mut flags = RawConfig {
        preset: c.preset,
        params: match (c.a, c.b, c.c) {
            (Some(a), Some(b), Some(c)) => Some(Coefficients { a, b, c }),
            _ => None,
        },
        s0: c.s0,
        equilibrium_index: c.equilibrium,
        gamma_max: c.gamma_max,
        hopf_index: c.hopf_index,
        epsilon: c.eps,
        mesh_intervals: c.mesh_intervals,
        mesh_degree: c.mesh_degree,
        output_dir: c.out.clone(),
        ..RawConfig::default()
    };
    match &cli.command {
        Command::Lindstedt { order } => flags.order = *order,
        Command::Validate { integrator_step } => flags.integrator_step = *integrator_step,
        Command::Continue {
            max_steps,
            h0,
            hmin,
            hmax,
            branch_gamma_min,
            branch_gamma_max,
            snapshot_every,
            ..
        } => {
            flags.continuation = RawContinuation {
                max_steps: *max_steps,
                gamma_min: *branch_gamma_min,
                gamma_max: *branch_gamma_max,
                h0: *h0,
                hmin: *hmin,
                hmax: *hmax,
                snapshot_every: *snapshot_every,
                ..RawContinuation::default()
            }
        }
        _ => {}
    }
    // A preset named on the command line replaces coefficients from the file.
    let mut merged = base.merge(&flags);
    if c.preset.is_some() && flags.params.is_none() {
        merged.params = None;
    }
    Ok(merged)
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, Failure> {
    let cfg = RunConfig::resolve(layered(cli)?)?;
    match &cli.command {
        Command::Equilibria => commands::equilibria(&cfg),
        Command::Hopf => commands::hopf(&cfg),
        Command::Lindstedt { .. } => commands::lindstedt(&cfg),
        Command::Correct => commands::correct(&cfg),
        Command::Continue { jobs, .. } => commands::continuation(&cfg, *jobs),
        Command::Validate { .. } => commands::validate(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
