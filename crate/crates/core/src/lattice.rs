// Copyright 2026 dce-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Semi-infinite waveguide array emulating the even Fock block.
//!
//! Site `n` carries the field `E_n(z)` and obeys
//!
//! ```text
//!     i dE_n/dz = −c_n E_{n−1} − c_{n+1} E_{n+1} − β_n E_n,
//!     c_n = C₁ √(2n(2n−1)),
//! ```
//!
//! with a linear ramp of propagation constants `β_n`. Site `n` plays the
//! role of the Fock state `|2n⟩`, `z` the role of time, and `Z = 2C₁z` the
//! role of the scaled time τ.
//!
//! Two readings of the ramp are supported, see [`Convention`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{evolve_sampled, AmplitudeVector, BlockHamiltonian, EvolveOptions, Parity};
use crate::params::{CavityParams, ScaledTime};

/// How the ramp constant α maps onto the cavity shift K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Convention {
    /// `K = 2α`: site energies `2αn`, so `x = α/(2C₁)`.
    Paper,
    /// `K = α`: site energies `αn`, so `x = α/(4C₁)`.
    Matched,
}

impl Convention {
    pub fn as_str(self) -> &'static str {
        match self {
            Convention::Paper => "paper",
            Convention::Matched => "matched",
        }
    }

    /// K per unit α.
    fn k_per_alpha(self) -> f64 {
        match self {
            Convention::Paper => 2.0,
            Convention::Matched => 1.0,
        }
    }
}

impl std::fmt::Display for Convention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Convention::Paper),
            "matched" => Ok(Convention::Matched),
            other => Err(Error::invalid(
                "convention",
                format!("expected `paper` or `matched`, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    c1: f64,
    alpha: f64,
    sites: usize,
    convention: Convention,
}

impl LatticeSpec {
    pub fn new(c1: f64, alpha: f64, sites: usize, convention: Convention) -> Result<Self> {
        if !(c1.is_finite() && c1 > 0.0) {
            return Err(Error::invalid("C1", format!("must be > 0, got {c1}")));
        }
        if !alpha.is_finite() {
            return Err(Error::invalid(
                "alpha",
                format!("must be finite, got {alpha}"),
            ));
        }
        if sites < 2 {
            return Err(Error::invalid(
                "N",
                format!("need at least 2 sites, got {sites}"),
            ));
        }
        Ok(Self {
            c1,
            alpha,
            sites,
            convention,
        })
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// Same array with a different site count.
    pub fn with_sites(&self, sites: usize) -> Result<Self> {
        Self::new(self.c1, self.alpha, sites, self.convention)
    }

    /// `c_n` for n = 1..N−1.
    pub fn couplings(&self) -> Vec<f64> {
        (1..self.sites).map(|n| coupling(self.c1, n)).collect()
    }

    /// Propagation-constant offset of site `n`.
    pub fn site_energy(&self, n: usize) -> f64 {
        self.convention.k_per_alpha() * self.alpha * n as f64
    }

    /// Detuning ratio of the emulated cavity.
    pub fn x(&self) -> f64 {
        self.convention.k_per_alpha() * self.alpha / (4.0 * self.c1)
    }

    /// Coupling-mode generator: `H_{nn} = −β_n`, `H_{n−1,n} = −c_n`.
    pub fn generator(&self) -> BlockHamiltonian {
        let diagonal = (0..self.sites).map(|n| -self.site_energy(n)).collect();
        let coupling = self.couplings().into_iter().map(|c| -c).collect();
        BlockHamiltonian::from_entries(Parity::Even, diagonal, coupling, 4.0 * self.c1)
            .expect("valid lattice spec")
    }
}

/// `c_n = C₁ √(2n(2n−1))`.
pub fn coupling(c1: f64, n: usize) -> f64 {
    let m = 2.0 * n as f64;
    c1 * (m * (m - 1.0)).sqrt()
}

/// Cavity parameters emulated by the array: `εω₀ = 4C₁` (with ω₀ = 1) and
/// K from the convention.
pub fn map_lattice_to_cavity(spec: &LatticeSpec) -> CavityParams {
    CavityParams::new(
        4.0 * spec.c1,
        1.0,
        spec.convention.k_per_alpha() * spec.alpha,
    )
    .expect("valid lattice spec")
}

/// Launch condition.
#[derive(Debug, Clone, PartialEq)]
pub enum LatticeInput {
    Site(usize),
    Profile(Vec<Complex64>),
}

/// Site intensities along the array.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub z: Vec<f64>,
    /// `intensities[k][m] = |E_m(z_k)|²`.
    pub intensities: Vec<Vec<f64>>,
    pub c1: f64,
    pub convention: Convention,
    /// Largest edge-window intensity seen during propagation.
    pub max_leakage: f64,
}

impl FieldMap {
    /// `Z = 2C₁z` for each grid point.
    pub fn scaled(&self) -> Vec<f64> {
        self.z.iter().map(|z| 2.0 * self.c1 * z).collect()
    }

    pub fn total(&self, k: usize) -> f64 {
        self.intensities[k].iter().sum()
    }

    /// `2 Σ_m m I_m` at grid index `k`.
    pub fn photon_number_at(&self, k: usize) -> f64 {
        2.0 * self.intensities[k]
            .iter()
            .enumerate()
            .map(|(m, i)| m as f64 * i)
            .sum::<f64>()
    }
}

/// Propagates the launch field along `z_grid` (non-negative, ascending).
/// Fails with [`Error::TruncationInsufficient`] when light reaches the last
/// tenth of the array.
pub fn propagate(spec: &LatticeSpec, input: &LatticeInput, z_grid: &[f64]) -> Result<FieldMap> {
    propagate_with(spec, input, z_grid, &EvolveOptions::default())
}

pub fn propagate_with(
    spec: &LatticeSpec,
    input: &LatticeInput,
    z_grid: &[f64],
    opts: &EvolveOptions,
) -> Result<FieldMap> {
    let values = match input {
        LatticeInput::Site(n) => {
            if *n >= spec.sites {
                return Err(Error::invalid(
                    "input",
                    format!("site {n} outside array of {} sites", spec.sites),
                ));
            }
            let mut v = vec![Complex64::new(0.0, 0.0); spec.sites];
            v[*n] = Complex64::new(1.0, 0.0);
            v
        }
        LatticeInput::Profile(p) => {
            if p.len() != spec.sites {
                return Err(Error::invalid(
                    "input",
                    format!("profile has {} entries for {} sites", p.len(), spec.sites),
                ));
            }
            let norm: f64 = p.iter().map(|a| a.norm_sqr()).sum();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(Error::invalid(
                    "input",
                    format!("profile power {norm} is not 1"),
                ));
            }
            p.clone()
        }
    };
    if z_grid.iter().any(|z| !(z.is_finite() && *z >= 0.0)) {
        return Err(Error::invalid("z", "grid values must be finite and >= 0"));
    }
    if z_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("z", "grid must be ascending"));
    }
    let psi0 = AmplitudeVector {
        values,
        parity: Parity::Even,
        tau: 0.0,
    };
    let runs = evolve_sampled(&psi0, &spec.generator(), z_grid, opts)?;
    let max_leakage = runs
        .iter()
        .map(|r| r.max_leakage)
        .fold(psi0.leakage(), f64::max);
    Ok(FieldMap {
        z: z_grid.to_vec(),
        intensities: runs.iter().map(|r| r.state.populations()).collect(),
        c1: spec.c1,
        convention: spec.convention,
        max_leakage,
    })
}

/// Classical analogue of the photon number, `2 Σ_m m I_m(z)`; `z` must be a
/// grid point of `f`.
pub fn classical_photon_number(f: &FieldMap, z: f64) -> Result<f64> {
    let k =
        f.z.iter()
            .position(|&g| (g - z).abs() <= 1e-12 * g.abs().max(1.0))
            .ok_or_else(|| Error::Domain(format!("z = {z} is not on the propagation grid")))?;
    Ok(f.photon_number_at(k))
}

/// Site count for a site-0 launch to stay inside the array up to `z_max`,
/// found by the same doubling search as the Fock truncation.
pub fn auto_sites(spec: &LatticeSpec, z_max: f64, leak_tol: f64) -> Result<usize> {
    let p = map_lattice_to_cavity(spec);
    let tau = ScaledTime::new(2.0 * spec.c1 * z_max)?;
    crate::fock::auto_truncate(&p, tau, leak_tol).map(|j| j + 1)
}

/// One gap of a synthesized array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub n: usize,
    pub coupling: f64,
    pub separation: f64,
    pub feasible: bool,
}

/// Separations `d_n = d₁ − s·ln(c_n/C₁)` realizing the coupling law through
/// `C_n = C₁ exp(−(d_n − d₁)/s)`. Gaps with `d_n ≤ d_min` are flagged
/// infeasible; a design without any feasible gap is an error.
pub fn synthesize_geometry(spec: &LatticeSpec, d1: f64, s: f64, d_min: f64) -> Result<Vec<Gap>> {
    if !(d1.is_finite() && d1 > 0.0) {
        return Err(Error::invalid("d1", format!("must be > 0, got {d1}")));
    }
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::invalid("s", format!("must be > 0, got {s}")));
    }
    if !d_min.is_finite() {
        return Err(Error::invalid(
            "d_min",
            format!("must be finite, got {d_min}"),
        ));
    }
    let gaps: Vec<Gap> = spec
        .couplings()
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let d = d1 - s * (c / spec.c1).ln();
            Gap {
                n: i + 1,
                coupling: c,
                separation: d,
                feasible: d > d_min,
            }
        })
        .collect();
    if !gaps.iter().any(|g| g.feasible) {
        return Err(Error::Design(format!(
            "no gap exceeds the fabrication floor d_min = {d_min} (d1 = {d1}, s = {s})"
        )));
    }
    Ok(gaps)
}

/// Inverse of [`synthesize_geometry`]: `C_n = C₁ exp(−(d_n − d₁)/s)`.
pub fn couplings_from_separations(c1: f64, d1: f64, s: f64, separations: &[f64]) -> Vec<f64> {
    separations
        .iter()
        .map(|d| c1 * (-(d - d1) / s).exp())
        .collect()
}

/// First gap index `n*` with `d_n ≤ d_min`, if any within the array.
pub fn first_infeasible(gaps: &[Gap]) -> Option<usize> {
    gaps.iter().find(|g| !g.feasible).map(|g| g.n)
}
