// Copyright 2026 dce-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dynamic disorder: random fluctuations δK(t) of the frequency shift.
//!
//! Each trajectory is a pure state driven by `ℋ − (δK(t)/2)a†a`. Averaging
//! over white noise with `⟨δK(t)δK(t′)⟩ = 4γ δ(t−t′)` gives the pure-dephasing
//! master equation with rate γ.
//!
//! Steps use Strang splitting: half a step of the exact `exp(−iℋh/2)`, the
//! diagonal noise phase, and another half step. Consecutive half steps are
//! fused, so a run of `s` steps costs `s + 1` applications of the
//! tridiagonal propagator.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{
    block_hamiltonian, leakage, photon_number, AmplitudeVector, BlockHamiltonian, Parity,
};
use crate::open_system::{evolve_moments, MomentState};
use crate::params::{CavityParams, ScaledTime};

/// Largest allowed `dt·εω₀`.
pub const MAX_DT_EPS_OMEGA0: f64 = 0.01;

/// Allowed norm drift per unit of evolution time.
pub const NORM_DRIFT_PER_TIME: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// Delta-correlated, `⟨δK δK⟩ = 4γ δ(t−t′)`.
    White { gamma: f64 },
    /// `⟨δK(t)δK(t′)⟩ = σ² exp(−|t−t′|/τ_c)`.
    OrnsteinUhlenbeck { variance: f64, tau_c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn white(gamma: f64, seed: u64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid(
                "gamma",
                format!("must be >= 0, got {gamma}"),
            ));
        }
        Ok(Self {
            kind: NoiseKind::White { gamma },
            seed,
        })
    }

    pub fn ornstein_uhlenbeck(variance: f64, tau_c: f64, seed: u64) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::invalid(
                "sigma2",
                format!("must be >= 0, got {variance}"),
            ));
        }
        if !(tau_c.is_finite() && tau_c > 0.0) {
            return Err(Error::invalid("tau_c", format!("must be > 0, got {tau_c}")));
        }
        Ok(Self {
            kind: NoiseKind::OrnsteinUhlenbeck { variance, tau_c },
            seed,
        })
    }

    /// Coloured noise with the same low-frequency strength as white noise of
    /// rate γ, i.e. `2σ²τ_c = 4γ`.
    pub fn ornstein_uhlenbeck_matched(gamma: f64, tau_c: f64, seed: u64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid(
                "gamma",
                format!("must be >= 0, got {gamma}"),
            ));
        }
        if !(tau_c.is_finite() && tau_c > 0.0) {
            return Err(Error::invalid("tau_c", format!("must be > 0, got {tau_c}")));
        }
        Self::ornstein_uhlenbeck(2.0 * gamma / tau_c, tau_c, seed)
    }

    /// Dephasing rate of the white-noise limit.
    pub fn effective_gamma(&self) -> f64 {
        match self.kind {
            NoiseKind::White { gamma } => gamma,
            NoiseKind::OrnsteinUhlenbeck { variance, tau_c } => 0.5 * variance * tau_c,
        }
    }

    fn is_silent(&self) -> bool {
        match self.kind {
            NoiseKind::White { gamma } => gamma == 0.0,
            NoiseKind::OrnsteinUhlenbeck { variance, .. } => variance == 0.0,
        }
    }
}

/// Stream of step-averaged noise values for one trajectory.
struct NoiseStream {
    spec: NoiseSpec,
    rng: ChaCha8Rng,
    /// Current OU value; drawn from the stationary law on first use.
    state: Option<f64>,
}

impl NoiseStream {
    fn new(spec: NoiseSpec, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(index);
        Self {
            spec,
            rng,
            state: None,
        }
    }

    fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Mean of δK over the next step of length `h`.
    fn next(&mut self, h: f64) -> f64 {
        if self.spec.is_silent() {
            return 0.0;
        }
        match self.spec.kind {
            NoiseKind::White { gamma } => (4.0 * gamma / h).sqrt() * self.normal(),
            NoiseKind::OrnsteinUhlenbeck { variance, tau_c } => {
                let x0 = match self.state {
                    Some(v) => v,
                    None => variance.sqrt() * self.normal(),
                };
                // exact joint law of the end value and the integral over the step
                let u = h / tau_c;
                let decay = (-u).exp();
                let var_end = variance * -(-2.0 * u).exp_m1();
                let var_int = variance * tau_c * tau_c * ou_integral_factor(u);
                let cov = variance * tau_c * (-u).exp_m1().powi(2);
                let l11 = var_end.sqrt();
                let l21 = if l11 > 0.0 { cov / l11 } else { 0.0 };
                let l22 = (var_int - l21 * l21).max(0.0).sqrt();
                let z1 = self.normal();
                let z2 = self.normal();
                let x1 = x0 * decay + l11 * z1;
                let integral = x0 * tau_c * -(-u).exp_m1() + l21 * z1 + l22 * z2;
                self.state = Some(x1);
                integral / h
            }
        }
    }
}

/// `2u − 3 + 4e^{−u} − e^{−2u}`.
fn ou_integral_factor(u: f64) -> f64 {
    if u < 0.05 {
        // (−1)^k (4 − 2^k) u^k / k!, k ≥ 3
        let mut sum = 0.0;
        let mut term = u * u / 2.0;
        for k in 3..16 {
            term *= u / k as f64;
            let c = 4.0 - (1u64 << k) as f64;
            let s = if k % 2 == 0 { c } else { -c };
            sum += s * term;
        }
        sum
    } else {
        2.0 * u - 3.0 + 4.0 * (-u).exp() - (-2.0 * u).exp()
    }
}

/// Noise path of `steps` values at spacing `dt`.
///
/// White noise gives i.i.d. Gaussians of variance `4γ/dt`; OU noise gives the
/// exact step averages of a stationary process. The generator is fixed by
/// `(spec.seed, trajectory_index)` alone.
pub fn sample_path(
    spec: &NoiseSpec,
    dt: f64,
    steps: usize,
    trajectory_index: u64,
) -> Result<Vec<f64>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    let mut stream = NoiseStream::new(*spec, trajectory_index);
    Ok((0..steps).map(|_| stream.next(dt)).collect())
}

/// Exact `exp(−iHh)` for a real symmetric tridiagonal `H`, by a Taylor series
/// about the centre of the diagonal.
struct Propagator {
    diagonal: Vec<f64>,
    coupling: Vec<f64>,
    h: f64,
    phase: Complex64,
    terms: usize,
    substeps: usize,
}

impl Propagator {
    fn new(ham: &BlockHamiltonian, h: f64) -> Self {
        let d = ham.diagonal();
        let c = ham.coupling();
        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let shift = 0.5 * (lo + hi);
        let diagonal: Vec<f64> = d.iter().map(|v| v - shift).collect();
        let n = d.len();
        let mut bound = 0.0f64;
        for j in 0..n {
            let mut row = diagonal[j].abs();
            if j > 0 {
                row += c[j - 1].abs();
            }
            if j + 1 < n {
                row += c[j].abs();
            }
            bound = bound.max(row);
        }
        let substeps = ((bound * h.abs()) / 4.0).ceil().max(1.0) as usize;
        let hs = h / substeps as f64;
        let b = bound * hs.abs();
        // stop once the bound on the next term is negligible
        let mut terms = 1;
        let mut term = b;
        while term > 1e-17 && terms < 80 {
            terms += 1;
            term *= b / terms as f64;
        }
        Self {
            diagonal,
            coupling: c.to_vec(),
            h: hs,
            phase: Complex64::from_polar(1.0, -shift * h),
            terms,
            substeps,
        }
    }

    fn apply(&self, v: &mut [Complex64], term: &mut Vec<Complex64>, next: &mut Vec<Complex64>) {
        let n = v.len();
        term.resize(n, Complex64::new(0.0, 0.0));
        next.resize(n, Complex64::new(0.0, 0.0));
        let (d, c) = (&self.diagonal[..], &self.coupling[..]);
        for _ in 0..self.substeps {
            term.copy_from_slice(v);
            for k in 1..=self.terms {
                // next = (−i h / k) H term, accumulated into v
                let f = self.h / k as f64;
                let rot = |a: Complex64| Complex64::new(f * a.im, -f * a.re);
                if n == 1 {
                    next[0] = rot(d[0] * term[0]);
                } else {
                    next[0] = rot(d[0] * term[0] + c[0] * term[1]);
                    for j in 1..n - 1 {
                        next[j] = rot(c[j - 1] * term[j - 1] + d[j] * term[j] + c[j] * term[j + 1]);
                    }
                    next[n - 1] = rot(c[n - 2] * term[n - 2] + d[n - 1] * term[n - 1]);
                }
                for (a, b) in v.iter_mut().zip(next.iter()) {
                    *a += *b;
                }
                std::mem::swap(term, next);
            }
        }
        for a in v.iter_mut() {
            *a *= self.phase;
        }
    }
}

/// Applies `exp(−iδφ·a†a)` with `δφ = −δK·h/2`.
fn apply_noise_phase(v: &mut [Complex64], parity: Parity, delta_k: f64, h: f64) {
    let dphi = -0.5 * delta_k * h;
    if dphi == 0.0 {
        return;
    }
    for (j, a) in v.iter_mut().enumerate() {
        *a *= Complex64::from_polar(1.0, -dphi * parity.photons(j) as f64);
    }
}

fn check_dt(p: &CavityParams, dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    let r = dt * p.eps_omega0();
    if r > MAX_DT_EPS_OMEGA0 * (1.0 + 1e-12) {
        return Err(Error::invalid(
            "dt",
            format!("dt·εω₀ = {r} exceeds {MAX_DT_EPS_OMEGA0}"),
        ));
    }
    Ok(())
}

/// Evolves `psi0` through one noise path with fixed step `dt`; returns the
/// state before the first step and after every step.
pub fn evolve_trajectory(
    psi0: &AmplitudeVector,
    p: &CavityParams,
    path: &[f64],
    dt: f64,
) -> Result<Vec<AmplitudeVector>> {
    check_dt(p, dt)?;
    let drift0 = (psi0.norm_sqr() - 1.0).abs();
    if drift0 > 1e-10 {
        return Err(Error::invalid(
            "psi0",
            format!("not normalized (|‖ψ‖²−1| = {drift0:.3e})"),
        ));
    }
    let ham = block_hamiltonian(p, psi0.parity, psi0.dim());
    let half = Propagator::new(&ham, 0.5 * dt);
    let full = Propagator::new(&ham, dt);
    let (mut t1, mut t2) = (Vec::new(), Vec::new());
    let mut out = Vec::with_capacity(path.len() + 1);
    out.push(psi0.clone());

    // `open` holds the state with the trailing half step still pending
    let mut open = psi0.values.clone();
    let mut started = false;
    for (s, &dk) in path.iter().enumerate() {
        if started {
            full.apply(&mut open, &mut t1, &mut t2);
        } else {
            half.apply(&mut open, &mut t1, &mut t2);
            started = true;
        }
        apply_noise_phase(&mut open, psi0.parity, dk, dt);
        let mut closed = open.clone();
        half.apply(&mut closed, &mut t1, &mut t2);
        let t = (s + 1) as f64 * dt;
        let state = AmplitudeVector {
            values: closed,
            parity: psi0.parity,
            tau: psi0.tau + 0.5 * p.eps_omega0() * t,
        };
        let drift = (state.norm_sqr() - psi0.norm_sqr()).abs();
        let tol = NORM_DRIFT_PER_TIME * t.max(1.0);
        if drift > tol {
            return Err(Error::NormDrift { drift, tol });
        }
        out.push(state);
    }
    Ok(out)
}

/// Ensemble statistics of the photon number on a scaled-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub tau: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub count: usize,
    pub seed: u64,
    /// Largest step used (physical time).
    pub dt: f64,
    /// Even-block dimension of every trajectory.
    pub dim: usize,
    /// Largest top-level population seen at any grid point of any trajectory.
    pub max_leakage: f64,
}

/// Photon number of one trajectory on the grid, plus its worst leakage.
/// Between grid points the interval is cut into equal steps no longer than
/// `dt`.
fn trajectory_photons(
    ham: &BlockHamiltonian,
    spec: &NoiseSpec,
    index: u64,
    dt: f64,
    times: &[f64],
) -> (Vec<f64>, f64) {
    let dim = ham.dim();
    let parity = ham.parity();
    let mut stream = NoiseStream::new(*spec, index);
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    psi[0] = Complex64::new(1.0, 0.0);
    let (mut t1, mut t2) = (Vec::new(), Vec::new());
    let mut photons = Vec::with_capacity(times.len());
    let mut worst = 0.0f64;
    // `psi` carries a pending half step of length `pending`
    let mut pending = 0.0;
    let mut t_prev = 0.0;
    for &t in times {
        let span = t - t_prev;
        let steps = if span > 0.0 {
            (span / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize
        } else {
            0
        };
        if steps > 0 {
            let h = span / steps as f64;
            Propagator::new(ham, pending + 0.5 * h).apply(&mut psi, &mut t1, &mut t2);
            let full = Propagator::new(ham, h);
            for s in 0..steps {
                if s > 0 {
                    full.apply(&mut psi, &mut t1, &mut t2);
                }
                apply_noise_phase(&mut psi, parity, stream.next(h), h);
            }
            pending = 0.5 * h;
        }
        let mut closed = psi.clone();
        if pending > 0.0 {
            Propagator::new(ham, pending).apply(&mut closed, &mut t1, &mut t2);
        }
        worst = worst.max(leakage(&closed));
        let state = AmplitudeVector {
            values: closed,
            parity,
            tau: 0.0,
        };
        photons.push(photon_number(&state));
        t_prev = t;
    }
    (photons, worst)
}

/// Pairwise (cascade) summation; the grouping depends only on the length.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Mean photon number and its standard error over `n_traj` noisy
/// trajectories started in the vacuum. `tau_grid` must be non-decreasing.
/// `j_max` sets the even-block dimension `j_max + 1`.
pub fn ensemble_average(
    p: &CavityParams,
    spec: &NoiseSpec,
    n_traj: usize,
    dt: f64,
    tau_grid: &[ScaledTime],
    j_max: usize,
) -> Result<EnsembleResult> {
    if n_traj < 2 {
        return Err(Error::invalid(
            "n_traj",
            format!("must be >= 2, got {n_traj}"),
        ));
    }
    if j_max < 2 {
        return Err(Error::invalid("J", format!("must be >= 2, got {j_max}")));
    }
    check_dt(p, dt)?;
    if tau_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("tau_grid", "must be non-decreasing"));
    }
    let times: Vec<f64> = tau_grid.iter().map(|&t| p.time_of(t)).collect();
    let ham = block_hamiltonian(p, Parity::Even, j_max + 1);

    let runs: Vec<(Vec<f64>, f64)> = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| trajectory_photons(&ham, spec, i, dt, &times))
        .collect();

    let count = n_traj as f64;
    let mut mean = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    let mut column = vec![0.0; n_traj];
    let mut squares = vec![0.0; n_traj];
    for k in 0..times.len() {
        // shifted by the first sample so identical runs give exactly zero spread
        let pivot = runs[0].0[k];
        for (i, r) in runs.iter().enumerate() {
            column[i] = r.0[k] - pivot;
            squares[i] = column[i] * column[i];
        }
        let s1 = pairwise_sum(&column);
        let s2 = pairwise_sum(&squares);
        let var = ((s2 - s1 * s1 / count) / (count - 1.0)).max(0.0);
        mean.push(pivot + s1 / count);
        stderr.push((var / count).sqrt());
    }
    let max_leakage = runs.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(EnsembleResult {
        tau: tau_grid.iter().map(|t| t.value()).collect(),
        mean,
        stderr,
        count: n_traj,
        seed: spec.seed,
        dt,
        dim: j_max + 1,
        max_leakage,
    })
}

/// Block cutoff `J` for trajectory runs: a power of two at least
/// `40(1 + n̄)`, with `n̄` the largest ensemble-averaged photon number on
/// `(0, τ_max]`.
pub fn default_trajectory_levels(
    p: &CavityParams,
    gamma: f64,
    tau_max: ScaledTime,
) -> Result<usize> {
    let q = p.with_gamma(gamma)?;
    let samples = 64;
    let taus: Vec<ScaledTime> = (1..=samples)
        .map(|k| ScaledTime::new(tau_max.value() * k as f64 / samples as f64))
        .collect::<Result<_>>()?;
    let peak = if tau_max.value() > 0.0 {
        evolve_moments(MomentState::vacuum(), &q, &taus, 1e-10)?
            .iter()
            .map(|m| m.n_mean)
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let want = (40.0 * (1.0 + peak)).ceil() as usize;
    Ok(want.next_power_of_two().max(64))
}
