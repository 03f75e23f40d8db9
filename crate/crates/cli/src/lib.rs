// SPDX-License-Identifier: Apache-2.0

//! `depin`: command-line front end for the pinning and copolymer toolkit.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser};

use crate::config::{read_config_file, RunConfig, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{command}: {source}")]
    Runtime {
        command: &'static str,
        #[source]
        source: depin_core::Error,
    },
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "depin", version, about = "Disordered pinning and copolymer models: exact recursions and estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Subcommand)]
enum Command {
    /// Pure (β = 0) free energy from the renewal equation.
    Pure(RunArgs),
    /// Quenched free energy over disorder replicas.
    Fe(RunArgs),
    /// Constrained free energy φ(β, m) on a grid of contact fractions.
    Phi(RunArgs),
    /// Critical point h_c(β) by bisection.
    Hc(RunArgs),
    /// Critical exponent and smoothing-envelope check near h_c(β).
    Smooth(RunArgs),
    /// Recursions against brute-force enumeration.
    Verify(RunArgs),
}

/// Shared flags; each subcommand accepts the subset it reads.
#[derive(Debug, Args)]
struct RunArgs {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `srw[:n_max=..]`, `power:alpha=..[,s=..,n_max=..,k_inf=..]`,
    /// `geometric:p=..[,k_inf=..,n_max=..]` or `file:PATH`.
    #[arg(long)]
    kernel: Option<String>,
    /// gaussian, uniform or rademacher.
    #[arg(long)]
    law: Option<String>,
    /// pinning or copolymer.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    h: Option<String>,
    /// `lo:hi:n` grid of fields (`lo:hi` bracket for `hc`).
    #[arg(long = "h-range", allow_hyphen_values = true)]
    h_range: Option<String>,
    /// Length, or comma-separated lengths.
    #[arg(long = "N")]
    n: Option<String>,
    #[arg(long)]
    replicas: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Window half-width for φ, or `auto`.
    #[arg(long)]
    epsilon: Option<String>,
    /// `lo:hi:n` grid or list of contact fractions.
    #[arg(long = "m-grid")]
    m_grid: Option<String>,
    /// Bisection tolerance on h_c.
    #[arg(long)]
    tol: Option<String>,
    /// `lo:hi` range of h_c − h scanned by `smooth`.
    #[arg(long = "dh-range")]
    dh_range: Option<String>,
    #[arg(long)]
    points: Option<String>,
    #[arg(long = "points-above")]
    points_above: Option<String>,
    /// Random instances for `verify`.
    #[arg(long)]
    draws: Option<String>,
    /// Output directory; without it tables go to stdout.
    #[arg(long)]
    out: Option<String>,
}

impl RunArgs {
    fn flags(self) -> Vec<(&'static str, String)> {
        [
            ("kernel", self.kernel),
            ("law", self.law),
            ("model", self.model),
            ("beta", self.beta),
            ("h", self.h),
            ("h-range", self.h_range),
            ("N", self.n),
            ("replicas", self.replicas),
            ("seed", self.seed),
            ("epsilon", self.epsilon),
            ("m-grid", self.m_grid),
            ("tol", self.tol),
            ("dh-range", self.dh_range),
            ("points", self.points),
            ("points-above", self.points_above),
            ("draws", self.draws),
            ("out", self.out),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit code: 0 on success, 2 on usage errors, 1 on runtime errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("depin: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (sub, args) = match cli.command {
        Command::Pure(a) => (Subcommand::Pure, a),
        Command::Fe(a) => (Subcommand::Fe, a),
        Command::Phi(a) => (Subcommand::Phi, a),
        Command::Hc(a) => (Subcommand::Hc, a),
        Command::Smooth(a) => (Subcommand::Smooth, a),
        Command::Verify(a) => (Subcommand::Verify, a),
    };
    let file = match &args.config {
        Some(path) => read_config_file(path)?,
        None => Default::default(),
    };
    let cfg = RunConfig::resolve(sub, file, args.flags())?;
    commands::dispatch(&cfg)
}
