// Copyright 2026 dce-rs Contributors
// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::io;
use std::path::Path;

use dce_core::closed_form::{revival_times, thermal_photon_number};
use dce_core::fock::{self, AmplitudeVector, EvolveOptions};
use dce_core::lattice::{self, Convention, LatticeInput, LatticeSpec};
use dce_core::open_system::{
    self, enhancement_curve, evolve_moments, thermal_state, DensityMatrix, LindbladOptions,
    MomentState,
};
use dce_core::stochastic::{self, NoiseSpec};
use dce_core::{CavityParams, Regime, ScaledTime};

use crate::output::{format_number, CsvOut};
use crate::{
    ConventionArg, DephaseArgs, DesignArgs, Engine, EvolveArgs, NoiseArg, PropagateArgs, SweepArgs,
    TrajectoriesArgs,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(dce_core::Error),
    Io(io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

impl From<dce_core::Error> for CliError {
    fn from(e: dce_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("--{name} must be finite, got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(usage(format!("--{name} must be > 0, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(usage(format!("--{name} must be >= 0, got {v}")))
    }
}

/// `n` evenly spaced values from `a` to `b` inclusive.
fn linspace(name: &str, a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    if b < a {
        return Err(usage(format!("{name} range is empty ({a} > {b})")));
    }
    match n {
        0 => Err(usage(format!("{name} needs at least one point"))),
        1 if a == b => Ok(vec![a]),
        1 => Err(usage(format!(
            "{name} needs at least two points to span [{a}, {b}]"
        ))),
        _ => Ok((0..n)
            .map(|i| {
                if i + 1 == n {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect()),
    }
}

fn header(command: &str) -> Vec<(String, String)> {
    vec![
        ("dce".into(), env!("CARGO_PKG_VERSION").into()),
        ("command".into(), command.into()),
    ]
}

fn push(meta: &mut Vec<(String, String)>, key: &str, value: impl ToString) {
    meta.push((key.into(), value.to_string()));
}

fn pushf(meta: &mut Vec<(String, String)>, key: &str, value: f64) {
    meta.push((key.into(), format_number(value, 15)));
}

fn convention(c: ConventionArg) -> Convention {
    match c {
        ConventionArg::Paper => Convention::Paper,
        ConventionArg::Matched => Convention::Matched,
    }
}

/// Scaled rate `2γ/εω₀` from either flag.
fn scaled_gamma(gamma: Option<f64>, gamma_scaled: Option<f64>, eps_omega0: f64) -> Result<f64> {
    match (gamma, gamma_scaled) {
        (Some(_), Some(_)) => Err(usage("--gamma and --gamma-scaled are mutually exclusive")),
        (Some(g), None) => Ok(2.0 * non_negative("gamma", g)? / eps_omega0),
        (None, Some(g)) => non_negative("gamma-scaled", g),
        (None, None) => Ok(0.0),
    }
}

fn out_path(p: &Option<std::path::PathBuf>) -> Option<&Path> {
    p.as_deref()
}

pub fn sweep(a: &SweepArgs, digits: usize) -> Result<()> {
    finite("x-min", a.x_min)?;
    finite("x-max", a.x_max)?;
    non_negative("tau-max", a.tau_max)?;
    let xs = linspace("x", a.x_min, a.x_max, a.x_steps)?;
    let taus = linspace("tau", 0.0, a.tau_max, a.tau_steps)?;

    let mut meta = header("sweep");
    push(&mut meta, "engine", "closed");
    pushf(&mut meta, "x_min", a.x_min);
    pushf(&mut meta, "x_max", a.x_max);
    push(&mut meta, "x_steps", a.x_steps);
    pushf(&mut meta, "tau_max", a.tau_max);
    push(&mut meta, "tau_steps", a.tau_steps);
    let mut out = CsvOut::create(
        out_path(&a.out),
        digits,
        &meta,
        &["x", "tau", "n_mean", "log10_n_mean", "regime"],
    )?;
    for &x in &xs {
        let regime = Regime::from_ratio(x, dce_core::params::DEFAULT_THRESHOLD_TOL);
        for &tau in &taus {
            let n = dce_core::closed_form::vacuum_photon_number(tau, x);
            out.row([
                out.num(x),
                out.num(tau),
                out.num(n),
                out.num(n.log10()),
                regime.to_string(),
            ])?;
        }
    }
    out.finish()?;
    Ok(())
}

pub fn evolve(a: &EvolveArgs, digits: usize) -> Result<()> {
    finite("x", a.x)?;
    positive("eps-omega0", a.eps_omega0)?;
    non_negative("tau-max", a.tau_max)?;
    non_negative("nbar", a.nbar)?;
    positive("leak-tol", a.leak_tol)?;
    let g = scaled_gamma(a.gamma, a.gamma_scaled, a.eps_omega0)?;
    if g > 0.0 && matches!(a.engine, Engine::Closed | Engine::Fock) {
        return Err(usage(
            "dephasing (--gamma/--gamma-scaled > 0) requires --engine lindblad or moments",
        ));
    }
    if a.nbar > 0.0 && a.engine == Engine::Fock {
        return Err(usage(
            "--nbar > 0 is a mixed state; use --engine closed, lindblad or moments",
        ));
    }
    if a.nmax.is_some() && matches!(a.engine, Engine::Closed | Engine::Moments) {
        return Err(usage("--nmax only applies to --engine fock or lindblad"));
    }
    let taus = linspace("tau", 0.0, a.tau_max, a.steps)?;
    let p = CavityParams::from_ratio(a.eps_omega0, a.x)?
        .with_scaled_gamma(g)?
        .with_thermal(a.nbar)?;
    let times: Vec<f64> = taus.iter().map(|&t| 2.0 * t / a.eps_omega0).collect();
    let scaled: Vec<ScaledTime> = taus
        .iter()
        .map(|&t| ScaledTime::new(t))
        .collect::<dce_core::Result<_>>()?;

    // (n_mean, leakage) per τ
    let mut levels = None;
    let rows: Vec<(f64, Option<f64>)> = match a.engine {
        Engine::Closed => taus
            .iter()
            .map(|&t| thermal_photon_number(a.nbar, t, a.x).map(|n| (n, None)))
            .collect::<dce_core::Result<_>>()?,
        Engine::Fock => {
            let j_max = match a.nmax {
                Some(n) => n / 2,
                None => fock::auto_truncate(&p, ScaledTime::new(a.tau_max)?, a.leak_tol)?,
            };
            levels = Some(2 * j_max + 1);
            let h = fock::build_even_hamiltonian(&p, j_max)?;
            let opts = EvolveOptions {
                leak_tol: a.leak_tol,
                ..EvolveOptions::default()
            };
            fock::evolve_sampled(&AmplitudeVector::vacuum(j_max + 1), &h, &times, &opts)?
                .iter()
                .map(|e| (fock::photon_number(&e.state), Some(e.state.leakage())))
                .collect()
        }
        Engine::Lindblad => {
            let initial = |l: usize| -> dce_core::Result<DensityMatrix> {
                if a.nbar > 0.0 {
                    thermal_state(a.nbar, l - 1)
                } else {
                    DensityMatrix::vacuum(l)
                }
            };
            let opts = LindbladOptions {
                leak_tol: a.leak_tol,
                ..LindbladOptions::default()
            };
            let samples = match a.nmax {
                Some(n) => {
                    levels = Some(n + 1);
                    open_system::evolve_lindblad_sampled(&initial(n + 1)?, &p, &times, &opts)?
                }
                None => {
                    let (l, s) = open_system::auto_levels(
                        &p,
                        initial,
                        MomentState::diagonal(a.nbar),
                        &times,
                        &opts,
                        open_system::DEFAULT_MAX_DM_LEVELS,
                    )?;
                    levels = Some(l);
                    s
                }
            };
            samples
                .iter()
                .map(|s| (s.state.photon_number(), Some(s.state.leakage())))
                .collect()
        }
        Engine::Moments => evolve_moments(MomentState::diagonal(a.nbar), &p, &scaled, 1e-12)?
            .iter()
            .map(|m| (m.n_mean, None))
            .collect(),
    };

    let engine = format!("{:?}", a.engine).to_lowercase();
    let mut meta = header("evolve");
    push(&mut meta, "engine", &engine);
    pushf(&mut meta, "x", a.x);
    pushf(&mut meta, "eps_omega0", a.eps_omega0);
    pushf(&mut meta, "gamma", p.gamma());
    pushf(&mut meta, "gamma_scaled", g);
    pushf(&mut meta, "nbar", a.nbar);
    pushf(&mut meta, "tau_max", a.tau_max);
    push(&mut meta, "steps", a.steps);
    pushf(&mut meta, "leak_tol", a.leak_tol);
    if let Some(l) = levels {
        push(&mut meta, "fock_levels", l);
    }
    let with_leak = matches!(a.engine, Engine::Fock | Engine::Lindblad);
    let columns: &[&str] = if with_leak {
        &["tau", "n_mean", "leakage"]
    } else {
        &["tau", "n_mean"]
    };
    let mut out = CsvOut::create(out_path(&a.out), digits, &meta, columns)?;
    for (tau, (n, leak)) in taus.iter().zip(rows) {
        let mut rec = vec![out.num(*tau), out.num(n)];
        if let Some(l) = leak {
            rec.push(out.num(l));
        }
        out.row(rec)?;
    }
    out.finish()?;
    Ok(())
}

pub fn propagate(a: &PropagateArgs, digits: usize) -> Result<()> {
    positive("c1", a.c1)?;
    finite("alpha", a.alpha)?;
    non_negative("z-max", a.z_max)?;
    let conv = convention(a.convention);
    let zs = linspace("z", 0.0, a.z_max, a.z_steps)?;
    let probe = LatticeSpec::new(a.c1, a.alpha, 2, conv)?;
    let sites = match a.sites {
        Some(n) => n,
        None => lattice::auto_sites(&probe, a.z_max, fock::DEFAULT_LEAK_TOL)?,
    };
    let spec = probe.with_sites(sites)?;
    let field = lattice::propagate(&spec, &LatticeInput::Site(0), &zs)?;
    let cav = lattice::map_lattice_to_cavity(&spec);

    let mut meta = header("propagate");
    push(&mut meta, "convention", conv);
    pushf(&mut meta, "C1", a.c1);
    pushf(&mut meta, "alpha", a.alpha);
    push(&mut meta, "sites", sites);
    pushf(&mut meta, "z_max", a.z_max);
    push(&mut meta, "z_steps", a.z_steps);
    pushf(&mut meta, "eps_omega0", cav.eps_omega0());
    pushf(&mut meta, "K", cav.k());
    pushf(&mut meta, "x", spec.x());
    push(&mut meta, "input_site", 0);
    let mut out = CsvOut::create(
        out_path(&a.out),
        digits,
        &meta,
        &["z", "Z", "site", "intensity"],
    )?;
    let big_z = field.scaled();
    for (k, z) in field.z.iter().enumerate() {
        for (m, i) in field.intensities[k].iter().enumerate() {
            out.row([out.num(*z), out.num(big_z[k]), m.to_string(), out.num(*i)])?;
        }
    }
    out.finish()?;
    Ok(())
}

pub fn dephase(a: &DephaseArgs, digits: usize) -> Result<()> {
    if !(a.x.is_finite() && a.x > 1.0) {
        return Err(usage(format!(
            "--x must exceed 1 (insulating regime), got {}",
            a.x
        )));
    }
    non_negative("gamma-scaled-min", a.gamma_scaled_min)?;
    non_negative("gamma-scaled-max", a.gamma_scaled_max)?;
    if a.revivals == 0 {
        return Err(usage("--revivals must be >= 1"));
    }
    let gammas = linspace(
        "gamma-scaled",
        a.gamma_scaled_min,
        a.gamma_scaled_max,
        a.gamma_scaled_steps,
    )?;
    let taus = revival_times(a.x, a.revivals)?;
    let curve = enhancement_curve(&gammas, a.x, &taus, 1e-12)?;

    let mut meta = header("dephase");
    push(&mut meta, "engine", "moments");
    pushf(&mut meta, "x", a.x);
    pushf(&mut meta, "gamma_scaled_min", a.gamma_scaled_min);
    pushf(&mut meta, "gamma_scaled_max", a.gamma_scaled_max);
    push(&mut meta, "gamma_scaled_steps", a.gamma_scaled_steps);
    push(&mut meta, "revivals", a.revivals);
    let mut out = CsvOut::create(
        out_path(&a.out),
        digits,
        &meta,
        &["gamma_scaled", "revival_index", "tau", "n_mean"],
    )?;
    for pt in &curve {
        out.row([
            out.num(pt.gamma_scaled),
            (pt.tau_index + 1).to_string(),
            out.num(pt.tau),
            out.num(pt.n_mean),
        ])?;
    }
    out.finish()?;
    Ok(())
}

pub fn trajectories(a: &TrajectoriesArgs, digits: usize) -> Result<()> {
    finite("x", a.x)?;
    positive("eps-omega0", a.eps_omega0)?;
    non_negative("tau-max", a.tau_max)?;
    let g = scaled_gamma(a.gamma, a.gamma_scaled, a.eps_omega0)?;
    let p = CavityParams::from_ratio(a.eps_omega0, a.x)?;
    let gamma = g * a.eps_omega0 / 2.0;
    let spec = match (a.noise, a.tauc) {
        (NoiseArg::White, None) => NoiseSpec::white(gamma, a.seed)?,
        (NoiseArg::White, Some(_)) => return Err(usage("--tauc only applies to --noise ou")),
        (NoiseArg::Ou, Some(tc)) => {
            NoiseSpec::ornstein_uhlenbeck_matched(gamma, positive("tauc", tc)?, a.seed)?
        }
        (NoiseArg::Ou, None) => return Err(usage("--noise ou requires --tauc")),
    };
    let dt = match a.dt {
        Some(dt) => positive("dt", dt)?,
        None => stochastic::MAX_DT_EPS_OMEGA0 / a.eps_omega0,
    };
    if a.tau_steps == 0 {
        return Err(usage("--tau-steps must be >= 1"));
    }
    let grid: Vec<ScaledTime> = (1..=a.tau_steps)
        .map(|k| ScaledTime::new(a.tau_max * k as f64 / a.tau_steps as f64))
        .collect::<dce_core::Result<_>>()?;
    let j_max = match a.nmax {
        Some(n) => n / 2,
        None => stochastic::default_trajectory_levels(&p, gamma, ScaledTime::new(a.tau_max)?)?,
    };
    let r = stochastic::ensemble_average(&p, &spec, a.traj, dt, &grid, j_max)?;

    let mut meta = header("trajectories");
    pushf(&mut meta, "x", a.x);
    pushf(&mut meta, "eps_omega0", a.eps_omega0);
    pushf(&mut meta, "gamma", gamma);
    pushf(&mut meta, "gamma_scaled", g);
    push(&mut meta, "noise", format!("{:?}", a.noise).to_lowercase());
    if let Some(tc) = a.tauc {
        pushf(&mut meta, "tauc", tc);
    }
    push(&mut meta, "traj", a.traj);
    push(&mut meta, "seed", a.seed);
    pushf(&mut meta, "dt", dt);
    pushf(&mut meta, "tau_max", a.tau_max);
    push(&mut meta, "tau_steps", a.tau_steps);
    push(&mut meta, "fock_levels", 2 * j_max + 1);
    push(
        &mut meta,
        "max_leakage",
        format_number(r.max_leakage, digits),
    );
    let mut out = CsvOut::create(
        out_path(&a.out),
        digits,
        &meta,
        &["tau", "mean", "stderr", "n_traj", "seed"],
    )?;
    for k in 0..r.tau.len() {
        out.row([
            out.num(r.tau[k]),
            out.num(r.mean[k]),
            out.num(r.stderr[k]),
            r.count.to_string(),
            r.seed.to_string(),
        ])?;
    }
    out.finish()?;
    Ok(())
}

pub fn design(a: &DesignArgs, digits: usize) -> Result<()> {
    let conv = convention(a.convention);
    let spec = LatticeSpec::new(a.c1, a.alpha, a.sites, conv)?;
    let gaps = lattice::synthesize_geometry(&spec, a.d1, a.s, a.dmin)?;

    let mut meta = header("design");
    push(&mut meta, "convention", conv);
    pushf(&mut meta, "C1 [1/cm]", a.c1);
    pushf(&mut meta, "alpha [1/cm]", a.alpha);
    push(&mut meta, "sites", a.sites);
    pushf(&mut meta, "d1 [um]", a.d1);
    pushf(&mut meta, "s [um]", a.s);
    pushf(&mut meta, "dmin [um]", a.dmin);
    pushf(&mut meta, "x", spec.x());
    match lattice::first_infeasible(&gaps) {
        Some(n) => push(&mut meta, "first_infeasible_gap", n),
        None => push(&mut meta, "first_infeasible_gap", "none"),
    }
    let mut out = CsvOut::create(
        out_path(&a.out),
        digits,
        &meta,
        &["n", "c_n", "d_n", "feasible"],
    )?;
    for g in &gaps {
        out.row([
            g.n.to_string(),
            out.num(g.coupling),
            out.num(g.separation),
            u8::from(g.feasible).to_string(),
        ])?;
    }
    out.finish()?;
    Ok(())
}
