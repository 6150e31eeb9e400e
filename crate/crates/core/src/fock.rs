// Copyright 2026 dce-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Numerical evolution of truncated Fock amplitudes.
//!
//! ℋ only couples `|m⟩ ↔ |m±2⟩`, so each parity block is a real symmetric
//! tridiagonal matrix. In the even block, index `j` stands for `|2j⟩`:
//!
//! ```text
//!     d_j = −K j
//!     c_j = −(εω₀/4) √(2j(2j−1))      couples j ↔ j−1
//! ```
//!
//! The vacuum lives entirely in the even block, which is also exactly the
//! waveguide array of the lattice module.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::closed_form::vacuum_photon_number;
use crate::error::{Error, Result};
use crate::ode::{Dopri5, Stats, Tolerances};
use crate::params::{CavityParams, ScaledTime};

/// Default truncation-leakage tolerance.
pub const DEFAULT_LEAK_TOL: f64 = 1e-10;
/// Hard cap of the automatic truncation search.
pub const DEFAULT_MAX_LEVELS: usize = 1 << 15;

/// Photon-number parity of a Fock block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Photon number of block index `j`.
    pub fn photons(self, j: usize) -> usize {
        match self {
            Parity::Even => 2 * j,
            Parity::Odd => 2 * j + 1,
        }
    }
}

/// Real symmetric tridiagonal generator of one parity block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockHamiltonian {
    parity: Parity,
    diagonal: Vec<f64>,
    /// `coupling[j-1]` couples indices `j-1` and `j`.
    coupling: Vec<f64>,
    /// εω₀, used to convert evolution time into scaled time.
    eps_omega0: f64,
}

/// The even block is the one the vacuum problem (and the lattice) lives in.
pub type EvenHamiltonian = BlockHamiltonian;

impl BlockHamiltonian {
    /// A tridiagonal generator from explicit entries; `coupling.len()` must be
    /// `diagonal.len() − 1`.
    pub fn from_entries(
        parity: Parity,
        diagonal: Vec<f64>,
        coupling: Vec<f64>,
        eps_omega0: f64,
    ) -> Result<Self> {
        if diagonal.len() < 2 || coupling.len() + 1 != diagonal.len() {
            return Err(Error::invalid(
                "coupling",
                format!(
                    "need {} couplings for {} levels, got {}",
                    diagonal.len().saturating_sub(1),
                    diagonal.len(),
                    coupling.len()
                ),
            ));
        }
        if diagonal.iter().chain(&coupling).any(|v| !v.is_finite()) {
            return Err(Error::invalid("hamiltonian", "entries must be finite"));
        }
        Ok(Self {
            parity,
            diagonal,
            coupling,
            eps_omega0,
        })
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// `c_j` for `j = 1..dim`; element `j−1` couples `j−1 ↔ j`.
    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    pub fn eps_omega0(&self) -> f64 {
        self.eps_omega0
    }

    /// `out = H·v`.
    pub fn apply(&self, v: &[Complex64], out: &mut [Complex64]) {
        let n = self.diagonal.len();
        for j in 0..n {
            let mut acc = self.diagonal[j] * v[j];
            if j > 0 {
                acc += self.coupling[j - 1] * v[j - 1];
            }
            if j + 1 < n {
                acc += self.coupling[j] * v[j + 1];
            }
            out[j] = acc;
        }
    }

    /// Schrödinger right-hand side `out = −i H v`.
    pub fn schrodinger_rhs(&self, v: &[Complex64], out: &mut [Complex64]) {
        self.apply(v, out);
        for o in out.iter_mut() {
            *o = Complex64::new(o.im, -o.re);
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            m[(j, j)] = self.diagonal[j];
        }
        for (j, &c) in self.coupling.iter().enumerate() {
            m[(j, j + 1)] = c;
            m[(j + 1, j)] = c;
        }
        m
    }
}

pub(crate) fn block_hamiltonian(
    p: &CavityParams,
    parity: Parity,
    levels: usize,
) -> BlockHamiltonian {
    let k = p.k();
    let g = p.eps_omega0() / 4.0;
    let diagonal = (0..levels)
        .map(|j| -0.5 * k * parity.photons(j) as f64)
        .collect();
    let coupling = (1..levels)
        .map(|j| {
            let m = parity.photons(j) as f64;
            -g * (m * (m - 1.0)).sqrt()
        })
        .collect();
    BlockHamiltonian {
        parity,
        diagonal,
        coupling,
        eps_omega0: p.eps_omega0(),
    }
}

/// Even block over `|0⟩, |2⟩, …, |2J⟩` (dimension `J+1`).
pub fn build_even_hamiltonian(p: &CavityParams, j_max: usize) -> Result<EvenHamiltonian> {
    if j_max < 2 {
        return Err(Error::invalid("J", format!("must be >= 2, got {j_max}")));
    }
    Ok(block_hamiltonian(p, Parity::Even, j_max + 1))
}

/// Odd block over `|1⟩, |3⟩, …, |2J+1⟩` (dimension `J+1`).
pub fn build_odd_hamiltonian(p: &CavityParams, j_max: usize) -> Result<BlockHamiltonian> {
    if j_max < 2 {
        return Err(Error::invalid("J", format!("must be >= 2, got {j_max}")));
    }
    Ok(block_hamiltonian(p, Parity::Odd, j_max + 1))
}

/// Truncated amplitudes of one parity block at scaled time `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeVector {
    pub values: Vec<Complex64>,
    pub parity: Parity,
    /// Scaled time tag; negative after backward evolution.
    pub tau: f64,
}

impl AmplitudeVector {
    /// `|0⟩` in an even block of dimension `dim`.
    pub fn vacuum(dim: usize) -> Self {
        Self::basis(dim, 0)
    }

    /// Even-block basis state `|2j⟩`.
    pub fn basis(dim: usize, j: usize) -> Self {
        let mut values = vec![Complex64::new(0.0, 0.0); dim];
        values[j] = Complex64::new(1.0, 0.0);
        Self {
            values,
            parity: Parity::Even,
            tau: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Population in the top 10% of block indices.
    pub fn leakage(&self) -> f64 {
        leakage(&self.values)
    }

    pub fn populations(&self) -> Vec<f64> {
        self.values.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// First index of the leakage window for a block of dimension `dim`.
pub(crate) fn leakage_start(dim: usize) -> usize {
    let j_max = dim.saturating_sub(1);
    j_max - j_max / 10 + 1
}

pub(crate) fn leakage(values: &[Complex64]) -> f64 {
    values[leakage_start(values.len()).min(values.len())..]
        .iter()
        .map(|a| a.norm_sqr())
        .sum()
}

/// `⟨a†a⟩ = Σ_j m_j |A_j|²` with `m_j` the photon number of block index `j`.
pub fn photon_number(psi: &AmplitudeVector) -> f64 {
    psi.values
        .iter()
        .enumerate()
        .map(|(j, a)| psi.parity.photons(j) as f64 * a.norm_sqr())
        .sum()
}

/// Integrator and truncation settings for [`evolve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub tol: Tolerances,
    pub leak_tol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            leak_tol: DEFAULT_LEAK_TOL,
        }
    }
}

impl EvolveOptions {
    pub fn with_rtol(rtol: f64) -> Result<Self> {
        Ok(Self {
            tol: Tolerances::new(rtol, Tolerances::default().atol)?,
            ..Self::default()
        })
    }
}

/// Outcome of an evolution: final state plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub state: AmplitudeVector,
    /// `‖ψ(t)‖² − ‖ψ(0)‖²`.
    pub norm_deviation: f64,
    /// Largest leakage seen at any accepted step.
    pub max_leakage: f64,
    pub stats: Stats,
}

fn check_dims(psi0: &AmplitudeVector, h: &BlockHamiltonian) -> Result<()> {
    if psi0.dim() != h.dim() {
        return Err(Error::invalid(
            "psi0",
            format!(
                "dimension {} does not match Hamiltonian {}",
                psi0.dim(),
                h.dim()
            ),
        ));
    }
    if psi0.parity != h.parity() {
        return Err(Error::invalid(
            "psi0",
            "parity does not match Hamiltonian block",
        ));
    }
    Ok(())
}

/// Solves `i dA/dt = H A` for a duration `t` (negative runs backwards).
pub fn evolve(
    psi0: &AmplitudeVector,
    h: &BlockHamiltonian,
    t: f64,
    opts: &EvolveOptions,
) -> Result<Evolution> {
    let mut out = evolve_sampled(psi0, h, &[t], opts)?;
    Ok(out.pop().expect("one sample"))
}

/// Evolves through the ascending (or descending) list of times measured
/// from `psi0`, returning the state at each.
pub fn evolve_sampled(
    psi0: &AmplitudeVector,
    h: &BlockHamiltonian,
    times: &[f64],
    opts: &EvolveOptions,
) -> Result<Vec<Evolution>> {
    check_dims(psi0, h)?;
    let norm0 = psi0.norm_sqr();
    let mut y = psi0.values.clone();
    let mut solver = Dopri5::new(y.len(), opts.tol);
    let mut max_leak = leakage(&y);
    let mut t_prev = 0.0;
    let mut total = Stats::default();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if !t.is_finite() {
            return Err(Error::invalid("t", "must be finite"));
        }
        let dim = y.len();
        let stats = solver.integrate(
            |_, v, dv| h.schrodinger_rhs(v, dv),
            t_prev,
            t,
            &mut y,
            |_, v| {
                max_leak = max_leak.max(leakage(v));
                if max_leak > opts.leak_tol {
                    return Err(Error::TruncationInsufficient {
                        leakage: max_leak,
                        tol: opts.leak_tol,
                        dim,
                    });
                }
                Ok(())
            },
        )?;
        total.accepted += stats.accepted;
        total.rejected += stats.rejected;
        total.evaluations += stats.evaluations;
        t_prev = t;
        let state = AmplitudeVector {
            values: y.clone(),
            parity: psi0.parity,
            tau: psi0.tau + h.eps_omega0() * t / 2.0,
        };
        out.push(Evolution {
            norm_deviation: state.norm_sqr() - norm0,
            state,
            max_leakage: max_leak,
            stats: total,
        });
    }
    Ok(out)
}

/// Largest vacuum photon number reached on `[0, tau_max]`.
pub(crate) fn peak_vacuum_photons(x: f64, tau_max: f64) -> f64 {
    if x.abs() > 1.0 {
        let half_period = 0.5 * std::f64::consts::PI / (x * x - 1.0).sqrt();
        if tau_max >= half_period {
            return 1.0 / (x * x - 1.0);
        }
    }
    vacuum_photon_number(tau_max, x)
}

/// Smallest `J` (doubling from 32, seeded at `≈10(1+n̄)`) for which the
/// evolved vacuum keeps its leakage below `leak_tol` up to `tau_max`.
pub fn auto_truncate(p: &CavityParams, tau_max: ScaledTime, leak_tol: f64) -> Result<usize> {
    auto_truncate_capped(p, tau_max, leak_tol, DEFAULT_MAX_LEVELS)
}

pub fn auto_truncate_capped(
    p: &CavityParams,
    tau_max: ScaledTime,
    leak_tol: f64,
    cap: usize,
) -> Result<usize> {
    if !(leak_tol > 0.0) {
        return Err(Error::invalid("leak_tol", "must be > 0"));
    }
    let n_peak = peak_vacuum_photons(p.x(), tau_max.value());
    let seed = (10.0 * (1.0 + n_peak)).ceil() as usize;
    let mut j = 32usize.max(seed.next_power_of_two());
    if tau_max.value() == 0.0 {
        return Ok(32);
    }
    let opts = EvolveOptions {
        leak_tol,
        ..EvolveOptions::default()
    };
    let t = p.time_of(tau_max);
    loop {
        if j > cap {
            return Err(Error::ResourceLimit { cap });
        }
        let h = build_even_hamiltonian(p, j)?;
        match evolve(&AmplitudeVector::vacuum(j + 1), &h, t, &opts) {
            Ok(_) => return Ok(j),
            Err(Error::TruncationInsufficient { .. }) => j *= 2,
            Err(e) => return Err(e),
        }
    }
}

/// Eigenvalues of a block, ascending.
pub fn spectrum(h: &BlockHamiltonian) -> Vec<f64> {
    let eig = nalgebra::SymmetricEigen::new(h.to_dense());
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Eigenvalues of ℋ on the full Fock space `|0⟩..|2J+1⟩` (both parity
/// blocks, `J+1` levels each), ascending.
pub fn full_spectrum(p: &CavityParams, j_max: usize) -> Result<Vec<f64>> {
    let mut vals = spectrum(&build_even_hamiltonian(p, j_max)?);
    vals.extend(spectrum(&build_odd_hamiltonian(p, j_max)?));
    vals.sort_by(|a, b| a.total_cmp(b));
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::vacuum_amplitudes;
    use approx::assert_relative_eq;

    fn params(eps_omega0: f64, x: f64) -> CavityParams {
        CavityParams::from_ratio(eps_omega0, x).unwrap()
    }

    #[test]
    fn matrix_elements() {
        let h = build_even_hamiltonian(&params(0.8, 1.25), 8).unwrap();
        assert_eq!(h.dim(), 9);
        assert_eq!(h.diagonal()[0], 0.0);
        assert_relative_eq!(h.coupling()[0], -0.2 * 2.0f64.sqrt(), epsilon = 1e-15);
        assert!((h.coupling()[0] + 0.28284).abs() < 1e-5);
        // K = 1
        assert_relative_eq!(h.diagonal()[3], -3.0, epsilon = 1e-15);
        let d = h.to_dense();
        assert_eq!(d, d.transpose());
        assert!(build_even_hamiltonian(&params(0.8, 1.25), 1).is_err());
    }

    #[test]
    fn odd_block_elements() {
        let h = build_odd_hamiltonian(&params(0.8, 1.25), 4).unwrap();
        // |1⟩ ↔ |3⟩: −(εω₀/4)√(3·2)
        assert_relative_eq!(h.coupling()[0], -0.2 * 6.0f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(h.diagonal()[1], -1.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_time_is_identity() {
        let h = build_even_hamiltonian(&params(1.0, 0.3), 16).unwrap();
        let psi = AmplitudeVector::vacuum(17);
        let out = evolve(&psi, &h, 0.0, &EvolveOptions::default()).unwrap();
        assert_eq!(out.state.values, psi.values);
    }

    #[test]
    fn resonant_photon_number() {
        let p = params(1.0, 0.0);
        let h = build_even_hamiltonian(&p, 128).unwrap();
        let t = p.time_of(ScaledTime::new(1.0).unwrap());
        let out = evolve(
            &AmplitudeVector::vacuum(129),
            &h,
            t,
            &EvolveOptions::default(),
        )
        .unwrap();
        let expected = 1.0f64.sinh().powi(2);
        assert!((photon_number(&out.state) - expected).abs() < 1e-8 * expected);
        assert!((out.state.tau - 1.0).abs() < 1e-14);
    }

    #[test]
    fn full_revival() {
        let p = params(0.8, 1.25);
        let h = build_even_hamiltonian(&p, 64).unwrap();
        let t = p.time_of(ScaledTime::new(4.18879).unwrap());
        let out = evolve(
            &AmplitudeVector::vacuum(65),
            &h,
            t,
            &EvolveOptions::default(),
        )
        .unwrap();
        assert!(out.state.values[0].norm_sqr() >= 1.0 - 1e-6);
    }

    #[test]
    fn matches_closed_form() {
        let p = params(1.0, 0.5);
        let h = build_even_hamiltonian(&p, 256).unwrap();
        let t = p.time_of(ScaledTime::new(2.0).unwrap());
        let out = evolve(
            &AmplitudeVector::vacuum(257),
            &h,
            t,
            &EvolveOptions::default(),
        )
        .unwrap();
        let expected = vacuum_photon_number(2.0, 0.5);
        assert!((photon_number(&out.state) - expected).abs() < 1e-8 * expected);
        assert!(out.norm_deviation.abs() < 1e-9);
    }

    #[test]
    fn amplitudes_match_disentangled_operator() {
        for x in [0.0, 0.5, 1.0, 1.25, 2.0] {
            let p = params(1.0, x);
            let h = build_even_hamiltonian(&p, 512).unwrap();
            let taus = [0.5, 1.5, 2.0];
            let times: Vec<f64> = taus
                .iter()
                .map(|&tau| p.time_of(ScaledTime::new(tau).unwrap()))
                .collect();
            let runs = evolve_sampled(
                &AmplitudeVector::vacuum(513),
                &h,
                &times,
                &EvolveOptions::default(),
            )
            .unwrap();
            for (tau, run) in taus.iter().zip(&runs) {
                // restore the dropped global phase e^{−iKt/4} = e^{−ixτ/2}
                let phase = Complex64::from_polar(1.0, -x * tau / 2.0);
                let amps = vacuum_amplitudes(*tau, x, 512).unwrap();
                for (a, b) in run.state.values.iter().zip(&amps) {
                    assert!((a - phase * b).norm() < 1e-8, "x={x} tau={tau}");
                }
            }
        }
    }

    #[test]
    fn time_reversal() {
        let p = params(1.0, 0.7);
        let h = build_even_hamiltonian(&p, 128).unwrap();
        let psi = AmplitudeVector::vacuum(129);
        let fwd = evolve(&psi, &h, 3.0, &EvolveOptions::default()).unwrap();
        let back = evolve(&fwd.state, &h, -3.0, &EvolveOptions::default()).unwrap();
        let dist: f64 = back
            .state
            .values
            .iter()
            .zip(&psi.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(dist < 1e-7);
        assert!(back.state.tau.abs() < 1e-12);
    }

    #[test]
    fn photon_number_of_basis_states() {
        assert_eq!(photon_number(&AmplitudeVector::vacuum(8)), 0.0);
        assert_eq!(photon_number(&AmplitudeVector::basis(8, 2)), 4.0);
    }

    #[test]
    fn leakage_is_reported() {
        let p = params(1.0, 0.0);
        let h = build_even_hamiltonian(&p, 16).unwrap();
        let t = p.time_of(ScaledTime::new(3.0).unwrap());
        let err = evolve(
            &AmplitudeVector::vacuum(17),
            &h,
            t,
            &EvolveOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::TruncationInsufficient { leakage, dim, .. } => {
                assert!(leakage > 1e-10);
                assert_eq!(dim, 17);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let h = build_even_hamiltonian(&params(1.0, 0.0), 16).unwrap();
        assert!(evolve(
            &AmplitudeVector::vacuum(10),
            &h,
            1.0,
            &EvolveOptions::default()
        )
        .is_err());
    }

    #[test]
    fn truncation_search() {
        assert_eq!(
            auto_truncate(&params(1.0, 2.0), ScaledTime::new(0.0).unwrap(), 1e-10).unwrap(),
            32
        );
        // max photon number 1/(x²−1) = 1/3 keeps the state compact
        let j = auto_truncate(&params(1.0, 2.0), ScaledTime::new(10.0).unwrap(), 1e-10).unwrap();
        assert!(j <= 64);
        let err =
            auto_truncate_capped(&params(1.0, 0.0), ScaledTime::new(3.0).unwrap(), 1e-10, 512);
        assert_eq!(err, Err(Error::ResourceLimit { cap: 512 }));
    }

    #[test]
    fn diagonal_spectrum() {
        let p = CavityParams::new(1e-300, 1.0, 0.5).unwrap();
        let vals = spectrum(&build_even_hamiltonian(&p, 10).unwrap());
        for (v, j) in vals.iter().zip((0..=10).rev()) {
            assert!((v + 0.5 * j as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn ladder_spacing() {
        let vals = full_spectrum(&params(0.8, 1.25), 256).unwrap();
        let top = &vals[vals.len() - 21..];
        for w in top.windows(2) {
            assert!((w[1] - w[0] - 0.3).abs() < 1e-6);
        }
        // each parity block alone has double spacing
        let even = spectrum(&build_even_hamiltonian(&params(0.8, 1.25), 256).unwrap());
        let n = even.len();
        assert!((even[n - 1] - even[n - 2] - 0.6).abs() < 1e-6);
    }
}
