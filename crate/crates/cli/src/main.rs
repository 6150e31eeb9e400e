// Copyright 2026 dce-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! `dce`: scenario runner writing CSV data for the cavity and lattice
//! engines.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "dce",
    version,
    about = "Photon generation in a modulated cavity and its waveguide-array analogue"
)]
struct Cli {
    /// Significant digits in numeric output.
    #[arg(long, global = true, default_value_t = 9, value_parser = clap::value_parser!(u32).range(1..=17))]
    precision: u32,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Vacuum photon number over an (x, τ) grid from the closed form.
    Sweep(SweepArgs),
    /// Photon number versus τ from one engine.
    Evolve(EvolveArgs),
    /// Site intensities along the waveguide array.
    Propagate(PropagateArgs),
    /// Photon number at the revival times versus dephasing rate.
    Dephase(DephaseArgs),
    /// Ensemble of noisy-detuning trajectories.
    Trajectories(TrajectoriesArgs),
    /// Waveguide separations realizing the coupling law.
    Design(DesignArgs),
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub x_min: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub x_max: f64,
    /// Number of x values (endpoints included).
    #[arg(long)]
    pub x_steps: usize,
    #[arg(long)]
    pub tau_max: f64,
    /// Number of τ values from 0 to tau-max inclusive.
    #[arg(long)]
    pub tau_steps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    Closed,
    Fock,
    Lindblad,
    Moments,
}

#[derive(Args, Debug)]
pub struct EvolveArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub x: f64,
    #[arg(long)]
    pub tau_max: f64,
    /// Number of τ values from 0 to tau-max inclusive.
    #[arg(long, default_value_t = 61)]
    pub steps: usize,
    #[arg(long, value_enum)]
    pub engine: Engine,
    /// Modulation product εω₀ (sets the unit of raw rates and times).
    #[arg(long, default_value_t = 1.0)]
    pub eps_omega0: f64,
    /// Pure-dephasing rate γ.
    #[arg(long, conflicts_with = "gamma_scaled")]
    pub gamma: Option<f64>,
    /// Scaled dephasing rate 2γ/εω₀.
    #[arg(long)]
    pub gamma_scaled: Option<f64>,
    /// Initial thermal occupation.
    #[arg(long, default_value_t = 0.0)]
    pub nbar: f64,
    /// Highest Fock level kept (automatic when omitted).
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Largest population tolerated in the top tenth of the Fock levels.
    #[arg(long, default_value_t = 1e-10)]
    pub leak_tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConventionArg {
    Paper,
    Matched,
}

#[derive(Args, Debug)]
pub struct PropagateArgs {
    #[arg(long)]
    pub c1: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, value_enum)]
    pub convention: ConventionArg,
    #[arg(long)]
    pub z_max: f64,
    /// Number of z values from 0 to z-max inclusive.
    #[arg(long, default_value_t = 101)]
    pub z_steps: usize,
    /// Array size (automatic when omitted).
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DephaseArgs {
    #[arg(long)]
    pub x: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma_scaled_min: f64,
    #[arg(long)]
    pub gamma_scaled_max: f64,
    #[arg(long, default_value_t = 41)]
    pub gamma_scaled_steps: usize,
    /// Number of revival times.
    #[arg(long, default_value_t = 3)]
    pub revivals: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseArg {
    White,
    Ou,
}

#[derive(Args, Debug)]
pub struct TrajectoriesArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub x: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps_omega0: f64,
    #[arg(long, conflicts_with = "gamma_scaled")]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub gamma_scaled: Option<f64>,
    #[arg(long, value_enum, default_value_t = NoiseArg::White)]
    pub noise: NoiseArg,
    /// OU correlation time (physical time units).
    #[arg(long)]
    pub tauc: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub traj: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest step in physical time; defaults to 0.01/εω₀.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub tau_max: f64,
    /// Number of τ values on (0, tau-max].
    #[arg(long, default_value_t = 50)]
    pub tau_steps: usize,
    /// Highest Fock level kept (automatic when omitted).
    #[arg(long)]
    pub nmax: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DesignArgs {
    #[arg(long)]
    pub c1: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, value_enum)]
    pub convention: ConventionArg,
    #[arg(long)]
    pub sites: usize,
    /// Separation of the first gap (µm).
    #[arg(long)]
    pub d1: f64,
    /// Decay length of the evanescent coupling (µm).
    #[arg(long)]
    pub s: f64,
    /// Fabrication floor on separations (µm).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub dmin: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let digits = cli.precision as usize;
    let result = match &cli.command {
        Command::Sweep(a) => commands::sweep(a, digits),
        Command::Evolve(a) => commands::evolve(a, digits),
        Command::Propagate(a) => commands::propagate(a, digits),
        Command::Dephase(a) => commands::dephase(a, digits),
        Command::Trajectories(a) => commands::trajectories(a, digits),
        Command::Design(a) => commands::design(a, digits),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
