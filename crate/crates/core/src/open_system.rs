// Copyright 2026 dce-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Pure dephasing: the master equation
//!
//! ```text
//!     dρ/dt = −i[ℋ, ρ] + γ D[a†a]ρ,     ⟨n|D[a†a]ρ|m⟩ = −(n−m)² ρ_nm / 2
//! ```
//!
//! solved two independent ways: on a truncated density matrix, and through
//! the closed moment system for `(⟨a†a⟩, ⟨a²⟩, ⟨a†²⟩)`, which is exact here
//! because ℋ is quadratic and the dephasing operator is the number operator.
//!
//! ℋ and D[a†a] both preserve photon-number parity, so ρ splits into an
//! even–even, an odd–odd and an even–odd block (the odd–even block is its
//! adjoint). Each block evolves on its own; blocks that start at zero stay
//! at zero and are not integrated.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{block_hamiltonian, BlockHamiltonian, Parity, DEFAULT_LEAK_TOL};
use crate::ode::{Dopri5, Stats, Tolerances};
use crate::params::{CavityParams, ScaledTime};

/// Default upper limit on Fock levels of the automatic truncation.
pub const DEFAULT_MAX_DM_LEVELS: usize = 1024;

/// Truncated field state over Fock levels `|0⟩..|N⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub entries: DMatrix<Complex64>,
    pub tau: f64,
    /// Population discarded when the state was truncated at construction.
    pub deficit: f64,
}

impl DensityMatrix {
    pub fn from_matrix(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() < 2 {
            return Err(Error::invalid(
                "rho",
                "must be square with at least 2 levels",
            ));
        }
        Ok(Self {
            entries,
            tau: 0.0,
            deficit: 0.0,
        })
    }

    /// `|ψ⟩⟨ψ|` from full Fock-space amplitudes.
    pub fn from_pure(amplitudes: &[Complex64]) -> Result<Self> {
        let n = amplitudes.len();
        let m = DMatrix::from_fn(n, n, |i, j| amplitudes[i] * amplitudes[j].conj());
        Self::from_matrix(m)
    }

    /// Fock state `|n⟩⟨n|` with `levels` levels.
    pub fn fock(levels: usize, n: usize) -> Result<Self> {
        if n >= levels {
            return Err(Error::invalid("n", format!("{n} outside {levels} levels")));
        }
        let mut m = DMatrix::zeros(levels, levels);
        m[(n, n)] = Complex64::new(1.0, 0.0);
        Self::from_matrix(m)
    }

    pub fn vacuum(levels: usize) -> Result<Self> {
        Self::fock(levels, 0)
    }

    pub fn levels(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.levels())
            .map(|n| self.entries[(n, n)].re)
            .collect()
    }

    /// `⟨a†a⟩ = Σ n ρ_nn`.
    pub fn photon_number(&self) -> f64 {
        self.populations()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// `⟨a²⟩ = Σ √((n+1)(n+2)) ρ_{n+2,n}`.
    pub fn a2(&self) -> Complex64 {
        (0..self.levels().saturating_sub(2))
            .map(|n| ((n + 1) as f64 * (n + 2) as f64).sqrt() * self.entries[(n + 2, n)])
            .sum()
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn odd_population(&self) -> f64 {
        self.populations().iter().skip(1).step_by(2).sum()
    }

    /// `max |ρ − ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.levels();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_hermitian_eigenvalue(&self.entries)
    }

    /// Population in the top 10% of Fock levels.
    pub fn leakage(&self) -> f64 {
        let pops = self.populations();
        let start = leakage_start(pops.len());
        pops[start..].iter().sum()
    }
}

fn leakage_start(levels: usize) -> usize {
    let top = levels - 1;
    top - top / 10 + 1
}

fn min_hermitian_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    nalgebra::SymmetricEigen::new(h).eigenvalues.min()
}

/// `D[a†a]ρ = LρL† − ½{L†L, ρ}` with `L = a†a`, evaluated by explicit
/// operator products (independent of the elementwise rule the engine uses).
pub fn dephasing_superoperator_check(rho: &DensityMatrix) -> DMatrix<Complex64> {
    let n = rho.levels();
    let l = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(i as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let ldl = l.adjoint() * &l;
    let half = Complex64::new(0.5, 0.0);
    &l * &rho.entries * l.adjoint() - (&ldl * &rho.entries + &rho.entries * &ldl) * half
}

/// Integrator and truncation settings for [`evolve_lindblad`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladOptions {
    pub tol: Tolerances,
    pub leak_tol: f64,
    /// Compute the minimum eigenvalue of each returned state.
    pub check_positivity: bool,
}

impl Default for LindbladOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances {
                rtol: 1e-8,
                atol: 1e-12,
                ..Tolerances::default()
            },
            leak_tol: DEFAULT_LEAK_TOL,
            check_positivity: true,
        }
    }
}

impl LindbladOptions {
    pub fn with_rtol(rtol: f64) -> Result<Self> {
        let d = Self::default();
        Ok(Self {
            tol: Tolerances::new(rtol, d.tol.atol)?,
            ..d
        })
    }
}

/// State and diagnostics at one sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladSample {
    pub state: DensityMatrix,
    pub trace_deviation: f64,
    pub max_leakage: f64,
    pub min_eigenvalue: Option<f64>,
    pub stats: Stats,
}

/// One parity block `ρ_{LR}` stored row-major inside the flat state.
struct Block {
    left: BlockHamiltonian,
    right: BlockHamiltonian,
    offset: usize,
}

impl Block {
    fn rows(&self) -> usize {
        self.left.dim()
    }

    fn cols(&self) -> usize {
        self.right.dim()
    }

    fn len(&self) -> usize {
        self.rows() * self.cols()
    }

    /// Off-diagonal part of `dB/dt = −i(H_L B − B H_R) − (γ/2)(n_i − n_j)² B`:
    /// only the hopping terms. The diagonal part is applied by [`Block::expo`].
    fn rhs(&self, y: &[Complex64], dy: &mut [Complex64]) {
        let (r, c) = (self.rows(), self.cols());
        let b = &y[self.offset..self.offset + r * c];
        let out = &mut dy[self.offset..self.offset + r * c];
        let cl = self.left.coupling();
        let cr = self.right.coupling();
        for i in 0..r {
            for j in 0..c {
                let idx = i * c + j;
                let mut comm = Complex64::new(0.0, 0.0);
                if i > 0 {
                    comm += cl[i - 1] * b[idx - c];
                }
                if i + 1 < r {
                    comm += cl[i] * b[idx + c];
                }
                if j > 0 {
                    comm -= b[idx - 1] * cr[j - 1];
                }
                if j + 1 < c {
                    comm -= b[idx + 1] * cr[j];
                }
                out[idx] = Complex64::new(comm.im, -comm.re);
            }
        }
    }

    /// Multiplies the block by `exp(Λs)` with
    /// `Λ_ij = −i(d_i − d_j) − (γ/2)(n_i − n_j)²`.
    fn expo(&self, gamma: f64, s: f64, v: &mut [Complex64]) {
        let (r, c) = (self.rows(), self.cols());
        let (pl, pr) = (self.left.parity(), self.right.parity());
        let row: Vec<Complex64> = self
            .left
            .diagonal()
            .iter()
            .map(|&d| Complex64::from_polar(1.0, -d * s))
            .collect();
        let col: Vec<Complex64> = self
            .right
            .diagonal()
            .iter()
            .map(|&d| Complex64::from_polar(1.0, d * s))
            .collect();
        let span = pl
            .photons(r.saturating_sub(1))
            .max(pr.photons(c.saturating_sub(1)))
            + 1;
        let deph: Vec<f64> = (0..span)
            .map(|d| (-0.5 * gamma * (d * d) as f64 * s).exp())
            .collect();
        let block = &mut v[self.offset..self.offset + r * c];
        for i in 0..r {
            let ni = pl.photons(i);
            for j in 0..c {
                let dn = ni.abs_diff(pr.photons(j));
                block[i * c + j] *= row[i] * col[j] * deph[dn];
            }
        }
    }

    /// Largest dephasing rate in the block.
    fn decay_bound(&self, gamma: f64) -> f64 {
        let top_l = self.left.parity().photons(self.rows().saturating_sub(1));
        let top_r = self.right.parity().photons(self.cols().saturating_sub(1));
        let d = top_l.max(top_r) as f64;
        0.5 * gamma * d * d
    }
}

fn parity_indices(levels: usize, parity: Parity) -> Vec<usize> {
    (0..)
        .map(|j| parity.photons(j))
        .take_while(|&n| n < levels)
        .collect()
}

struct BlockLayout {
    blocks: Vec<Block>,
    len: usize,
}

impl BlockLayout {
    fn new(p: &CavityParams, rho: &DensityMatrix) -> Self {
        let levels = rho.levels();
        let even = parity_indices(levels, Parity::Even);
        let odd = parity_indices(levels, Parity::Odd);
        let he = block_hamiltonian(p, Parity::Even, even.len());
        let ho = block_hamiltonian(p, Parity::Odd, odd.len());
        let nonzero = |rows: &[usize], cols: &[usize]| {
            rows.iter().any(|&i| {
                cols.iter()
                    .any(|&j| rho.entries[(i, j)] != Complex64::new(0.0, 0.0))
            })
        };
        let mut blocks = Vec::new();
        let mut offset = 0;
        for (rows, cols, l, r) in [
            (&even, &even, &he, &he),
            (&odd, &odd, &ho, &ho),
            (&even, &odd, &he, &ho),
        ] {
            if !rows.is_empty() && !cols.is_empty() && nonzero(rows, cols) {
                let b = Block {
                    left: l.clone(),
                    right: r.clone(),
                    offset,
                };
                offset += b.len();
                blocks.push(b);
            }
        }
        Self {
            blocks,
            len: offset,
        }
    }

    fn indices(block: &Block) -> (Vec<usize>, Vec<usize>) {
        let rows = (0..block.rows())
            .map(|i| block.left.parity().photons(i))
            .collect();
        let cols = (0..block.cols())
            .map(|j| block.right.parity().photons(j))
            .collect();
        (rows, cols)
    }

    fn pack(&self, rho: &DensityMatrix) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.len];
        for b in &self.blocks {
            let (rows, cols) = Self::indices(b);
            for (i, &ni) in rows.iter().enumerate() {
                for (j, &nj) in cols.iter().enumerate() {
                    y[b.offset + i * cols.len() + j] = rho.entries[(ni, nj)];
                }
            }
        }
        y
    }

    fn unpack(&self, y: &[Complex64], levels: usize) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(levels, levels);
        for b in &self.blocks {
            let (rows, cols) = Self::indices(b);
            let mixed = b.left.parity() != b.right.parity();
            for (i, &ni) in rows.iter().enumerate() {
                for (j, &nj) in cols.iter().enumerate() {
                    let v = y[b.offset + i * cols.len() + j];
                    m[(ni, nj)] = v;
                    if mixed {
                        m[(nj, ni)] = v.conj();
                    }
                }
            }
        }
        m
    }

    /// Population in the top 10% of Fock levels, read from diagonal blocks.
    fn leakage(&self, y: &[Complex64], levels: usize) -> f64 {
        let start = leakage_start(levels);
        let mut leak = 0.0;
        for b in self
            .blocks
            .iter()
            .filter(|b| b.left.parity() == b.right.parity())
        {
            let c = b.cols();
            for i in 0..b.rows() {
                if b.left.parity().photons(i) >= start {
                    leak += y[b.offset + i * c + i].re;
                }
            }
        }
        leak
    }

    fn min_eigenvalue(&self, rho: &DMatrix<Complex64>) -> f64 {
        let mixed = self
            .blocks
            .iter()
            .any(|b| b.left.parity() != b.right.parity());
        if mixed {
            return min_hermitian_eigenvalue(rho);
        }
        self.blocks
            .iter()
            .map(|b| {
                let (rows, _) = Self::indices(b);
                let sub = DMatrix::from_fn(rows.len(), rows.len(), |i, j| rho[(rows[i], rows[j])]);
                min_hermitian_eigenvalue(&sub)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Evolves `rho0` for a duration `t` under the master equation with the
/// Hamiltonian and dephasing rate of `p`.
pub fn evolve_lindblad(
    rho0: &DensityMatrix,
    p: &CavityParams,
    t: f64,
    opts: &LindbladOptions,
) -> Result<LindbladSample> {
    let mut out = evolve_lindblad_sampled(rho0, p, &[t], opts)?;
    Ok(out.pop().expect("one sample"))
}

/// Evolves through the list of times (measured from `rho0`), returning the
/// state at each. Without dephasing the blocks are propagated exactly in the
/// eigenbasis of ℋ and leakage is checked at the requested times only;
/// otherwise the master equation is integrated step by step.
pub fn evolve_lindblad_sampled(
    rho0: &DensityMatrix,
    p: &CavityParams,
    times: &[f64],
    opts: &LindbladOptions,
) -> Result<Vec<LindbladSample>> {
    let levels = rho0.levels();
    let herm = rho0.hermiticity_error();
    if herm > 1e-10 {
        return Err(Error::invalid(
            "rho0",
            format!("not Hermitian (error {herm:.3e})"),
        ));
    }
    let tr = rho0.trace();
    if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
        return Err(Error::invalid("rho0", format!("trace {tr} is not 1")));
    }
    let layout = BlockLayout::new(p, rho0);
    let mut y = layout.pack(rho0);
    let gamma = p.gamma();
    let decay_bound = layout
        .blocks
        .iter()
        .map(|b| b.decay_bound(gamma))
        .fold(0.0, f64::max);
    let mut max_leak = layout.leakage(&y, levels);
    let check_leak = |leak: f64| {
        if leak > opts.leak_tol {
            return Err(Error::TruncationInsufficient {
                leakage: leak,
                tol: opts.leak_tol,
                dim: levels,
            });
        }
        Ok(())
    };
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("t", "must be finite"));
    }
    let mut out = Vec::with_capacity(times.len());
    if gamma == 0.0 {
        let prop = SpectralPropagator::new(&layout, &y);
        for &t in times {
            let y = prop.at(&layout, t);
            max_leak = max_leak.max(layout.leakage(&y, levels));
            check_leak(max_leak)?;
            out.push(sample(
                &layout,
                &y,
                rho0,
                p,
                t,
                max_leak,
                Stats::default(),
                opts,
            )?);
        }
        return Ok(out);
    }

    let mut solver = Dopri5::new(y.len(), opts.tol);
    let mut t_prev = 0.0;
    let mut total = Stats::default();
    for &t in times {
        let stats = solver.integrate_split(
            |_, v, dv| {
                for b in &layout.blocks {
                    b.rhs(v, dv);
                }
            },
            |s, v| {
                for b in &layout.blocks {
                    b.expo(gamma, s, v);
                }
            },
            decay_bound,
            t_prev,
            t,
            &mut y,
            |_, v| {
                max_leak = max_leak.max(layout.leakage(v, levels));
                check_leak(max_leak)
            },
        )?;
        total.accepted += stats.accepted;
        total.rejected += stats.rejected;
        total.evaluations += stats.evaluations;
        t_prev = t;
        out.push(sample(&layout, &y, rho0, p, t, max_leak, total, opts)?);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn sample(
    layout: &BlockLayout,
    y: &[Complex64],
    rho0: &DensityMatrix,
    p: &CavityParams,
    t: f64,
    max_leakage: f64,
    stats: Stats,
    opts: &LindbladOptions,
) -> Result<LindbladSample> {
    let entries = layout.unpack(y, rho0.levels());
    let min_eigenvalue = if opts.check_positivity {
        let e = layout.min_eigenvalue(&entries);
        if e < -1e-6 {
            return Err(Error::Positivity { min_eig: e });
        }
        Some(e)
    } else {
        None
    };
    let state = DensityMatrix {
        entries,
        tau: rho0.tau + p.eps_omega0() * t / 2.0,
        deficit: rho0.deficit,
    };
    Ok(LindbladSample {
        trace_deviation: state.trace().re - 1.0,
        state,
        max_leakage,
        min_eigenvalue,
        stats,
    })
}

/// Without dephasing each block evolves as `B(t) = U_L B U_R†`; with
/// `H = V Λ Vᵀ` this is `V_L [e^{−i(λ_i−λ_j)t} ∘ (V_Lᵀ B V_R)] V_Rᵀ`.
struct SpectralPropagator {
    parts: Vec<SpectralBlock>,
}

/// Eigenvectors (columns) and eigenvalues of one block Hamiltonian.
type Eigen = (DMatrix<f64>, Vec<f64>);

struct SpectralBlock {
    left: Eigen,
    right: Eigen,
    /// `V_Lᵀ B(0) V_R`, real and imaginary parts.
    coeff: (DMatrix<f64>, DMatrix<f64>),
}

fn eigen_pair(h: &BlockHamiltonian) -> Eigen {
    let e = nalgebra::SymmetricEigen::new(h.to_dense());
    (e.eigenvectors, e.eigenvalues.iter().copied().collect())
}

impl SpectralPropagator {
    fn new(layout: &BlockLayout, y: &[Complex64]) -> Self {
        let mut cache: Vec<(Parity, Eigen)> = Vec::new();
        let mut eig = |h: &BlockHamiltonian| {
            if let Some((_, e)) = cache.iter().find(|(q, _)| *q == h.parity()) {
                return e.clone();
            }
            let e = eigen_pair(h);
            cache.push((h.parity(), e.clone()));
            e
        };
        let parts = layout
            .blocks
            .iter()
            .map(|b| {
                let left = eig(&b.left);
                let right = eig(&b.right);
                let (r, c) = (b.rows(), b.cols());
                let block = &y[b.offset..b.offset + r * c];
                let re = DMatrix::from_fn(r, c, |i, j| block[i * c + j].re);
                let im = DMatrix::from_fn(r, c, |i, j| block[i * c + j].im);
                let lt = left.0.transpose();
                let coeff = (&lt * re * &right.0, &lt * im * &right.0);
                SpectralBlock { left, right, coeff }
            })
            .collect();
        Self { parts }
    }

    fn at(&self, layout: &BlockLayout, t: f64) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); layout.len];
        for (b, s) in layout.blocks.iter().zip(&self.parts) {
            let (r, c) = (b.rows(), b.cols());
            let (mut re, mut im) = (s.coeff.0.clone(), s.coeff.1.clone());
            for i in 0..r {
                for j in 0..c {
                    let ph = Complex64::from_polar(1.0, -(s.left.1[i] - s.right.1[j]) * t);
                    let v = ph * Complex64::new(re[(i, j)], im[(i, j)]);
                    re[(i, j)] = v.re;
                    im[(i, j)] = v.im;
                }
            }
            let rt = s.right.0.transpose();
            let re = &s.left.0 * re * &rt;
            let im = &s.left.0 * im * &rt;
            for i in 0..r {
                for j in 0..c {
                    y[b.offset + i * c + j] = Complex64::new(re[(i, j)], im[(i, j)]);
                }
            }
        }
        y
    }
}

/// Thermal field `Σ P_n |n⟩⟨n|`, `P_n = n̄ⁿ/(1+n̄)^{n+1}`, over levels
/// `0..=n_max`, renormalized; the discarded tail is kept in `deficit`.
pub fn thermal_state(nbar: f64, n_max: usize) -> Result<DensityMatrix> {
    if !(nbar.is_finite() && nbar >= 0.0) {
        return Err(Error::invalid("nbar", format!("must be >= 0, got {nbar}")));
    }
    if n_max < 1 {
        return Err(Error::invalid("N", "must be >= 1"));
    }
    let q = nbar / (1.0 + nbar);
    let tail = q.powi(n_max as i32 + 1);
    if tail >= 1e-10 {
        return Err(Error::TailTooHeavy {
            tail,
            levels: n_max + 1,
        });
    }
    let mut m = DMatrix::zeros(n_max + 1, n_max + 1);
    let mut pn = 1.0 / (1.0 + nbar);
    for n in 0..=n_max {
        m[(n, n)] = Complex64::new(pn / (1.0 - tail), 0.0);
        pn *= q;
    }
    let mut rho = DensityMatrix::from_matrix(m)?;
    rho.deficit = tail;
    Ok(rho)
}

/// The closed moment triple; `⟨a†²⟩` is `conj(a2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentState {
    pub n_mean: f64,
    pub a2: Complex64,
}

impl MomentState {
    pub fn vacuum() -> Self {
        Self {
            n_mean: 0.0,
            a2: Complex64::new(0.0, 0.0),
        }
    }

    /// Initial moments of a diagonal (e.g. thermal) state.
    pub fn diagonal(n_mean: f64) -> Self {
        Self {
            n_mean,
            a2: Complex64::new(0.0, 0.0),
        }
    }

    pub fn a_dag2(&self) -> Complex64 {
        self.a2.conj()
    }

    /// `|⟨a²⟩|² ≤ n(n+1)`, which holds for every state.
    pub fn is_physical(&self) -> bool {
        self.n_mean >= 0.0
            && self.a2.norm_sqr() <= self.n_mean * (self.n_mean + 1.0) * (1.0 + 1e-12)
    }
}

/// Moment equations in scaled time τ = εω₀t/2, with `K̃ = ix − g`,
/// `g = 2γ/(εω₀)`:
///
/// ```text
///     d⟨a†a⟩/dτ = i(⟨a†²⟩ − ⟨a²⟩)
///     d⟨a²⟩/dτ  = 2K̃⟨a²⟩ + i(2⟨a†a⟩ + 1)
/// ```
fn moments_rhs(x: f64, g: f64, y: &[Complex64], dy: &mut [Complex64]) {
    let n = y[0].re;
    let a2 = y[1];
    dy[0] = Complex64::new(2.0 * a2.im, 0.0);
    dy[1] = 2.0 * Complex64::new(-g, x) * a2 + Complex64::new(0.0, 2.0 * n + 1.0);
}

/// Integrates the moment system from `m0` through the ascending scaled
/// times `taus`, returning the state at each.
pub fn evolve_moments(
    m0: MomentState,
    p: &CavityParams,
    taus: &[ScaledTime],
    rtol: f64,
) -> Result<Vec<MomentState>> {
    let raw: Vec<f64> = taus.iter().map(|t| t.value()).collect();
    evolve_moments_scaled(m0, p.x(), p.gamma_scaled(), &raw, rtol)
}

/// As [`evolve_moments`], parameterized directly by `x` and `g = 2γ/εω₀`.
pub fn evolve_moments_scaled(
    m0: MomentState,
    x: f64,
    gamma_scaled: f64,
    taus: &[f64],
    rtol: f64,
) -> Result<Vec<MomentState>> {
    if !m0.is_physical() {
        return Err(Error::invalid("m0", "moments violate |⟨a²⟩|² ≤ n(n+1)"));
    }
    if !(gamma_scaled.is_finite() && gamma_scaled >= 0.0) {
        return Err(Error::invalid("gamma_scaled", "must be >= 0"));
    }
    let tol = Tolerances::new(rtol, 1e-14)?;
    let mut y = [Complex64::new(m0.n_mean, 0.0), m0.a2];
    let mut solver = Dopri5::new(2, tol);
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        if !(tau.is_finite() && tau >= prev) {
            return Err(Error::invalid(
                "tau",
                "sample times must be ascending and >= 0",
            ));
        }
        solver.integrate(
            |_, v, dv| moments_rhs(x, gamma_scaled, v, dv),
            prev,
            tau,
            &mut y,
            |_, _| Ok(()),
        )?;
        prev = tau;
        out.push(MomentState {
            n_mean: y[0].re,
            a2: y[1],
        });
    }
    Ok(out)
}

/// One entry of the dephasing-enhancement table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhancementPoint {
    /// `2γ/(εω₀)`.
    pub gamma_scaled: f64,
    pub tau_index: usize,
    pub tau: f64,
    pub n_mean: f64,
}

/// Vacuum photon number from the moment engine at every
/// (scaled dephasing rate, scaled time) pair; rows ordered by rate, then
/// time.
pub fn enhancement_curve(
    gammas_scaled: &[f64],
    x: f64,
    taus: &[f64],
    rtol: f64,
) -> Result<Vec<EnhancementPoint>> {
    let mut sorted: Vec<(usize, f64)> = taus.iter().copied().enumerate().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let grid: Vec<f64> = sorted.iter().map(|s| s.1).collect();
    let rows: Result<Vec<Vec<EnhancementPoint>>> = gammas_scaled
        .par_iter()
        .map(|&g| {
            let traj = evolve_moments_scaled(MomentState::vacuum(), x, g, &grid, rtol)?;
            let mut row = vec![
                EnhancementPoint {
                    gamma_scaled: g,
                    tau_index: 0,
                    tau: 0.0,
                    n_mean: 0.0
                };
                taus.len()
            ];
            for ((idx, tau), m) in sorted.iter().zip(&traj) {
                row[*idx] = EnhancementPoint {
                    gamma_scaled: g,
                    tau_index: *idx,
                    tau: *tau,
                    n_mean: m.n_mean,
                };
            }
            Ok(row)
        })
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

/// Smallest Fock truncation (doubling, seeded from the moment engine's peak
/// photon number) for which evolving `rho0` to `tau_max` keeps the top-10%
/// population below `opts.leak_tol`. Returns the evolved sample list along
/// with the level count so the work is not repeated.
pub fn auto_levels(
    p: &CavityParams,
    initial: impl Fn(usize) -> Result<DensityMatrix>,
    m0: MomentState,
    times: &[f64],
    opts: &LindbladOptions,
    cap: usize,
) -> Result<(usize, Vec<LindbladSample>)> {
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let tau_max = p.eps_omega0() * t_max / 2.0;
    let grid: Vec<f64> = (1..=64).map(|k| tau_max * k as f64 / 64.0).collect();
    let peak = evolve_moments_scaled(m0, p.x(), p.gamma_scaled(), &grid, 1e-10)?
        .iter()
        .map(|m| m.n_mean)
        .fold(m0.n_mean, f64::max);
    let seed = (20.0 * (1.0 + peak)).ceil() as usize;
    let mut levels = 32usize.max(seed.next_power_of_two());
    loop {
        if levels > cap {
            return Err(Error::ResourceLimit { cap });
        }
        let rho0 = initial(levels)?;
        match evolve_lindblad_sampled(&rho0, p, times, opts) {
            Ok(samples) => return Ok((levels, samples)),
            Err(Error::TruncationInsufficient { .. }) => levels *= 2,
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::vacuum_photon_number;
    use approx::assert_relative_eq;

    fn params(eps_omega0: f64, x: f64, gamma_scaled: f64) -> CavityParams {
        CavityParams::from_ratio(eps_omega0, x)
            .unwrap()
            .with_scaled_gamma(gamma_scaled)
            .unwrap()
    }

    fn random_rho(levels: usize) -> DensityMatrix {
        let mut m = DMatrix::from_fn(levels, levels, |i, j| {
            Complex64::new(
                ((i * 7 + j * 3) % 11) as f64 * 0.01,
                ((i * 5 + j) % 7) as f64 * 0.01,
            )
        });
        m = &m * m.adjoint();
        let tr = m.trace();
        DensityMatrix::from_matrix(m / tr).unwrap()
    }

    #[test]
    fn dephasing_kills_only_coherences() {
        let rho = thermal_state(1.0, 40).unwrap();
        let d = dephasing_superoperator_check(&rho);
        assert!(d.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn dephasing_matrix_elements() {
        let rho = random_rho(6);
        let d = dephasing_superoperator_check(&rho);
        for n in 0..6 {
            for m in 0..6 {
                let dn = n as f64 - m as f64;
                let expected = -dn * dn * rho.entries[(n, m)] / 2.0;
                assert!((d[(n, m)] - expected).norm() < 1e-15);
            }
        }
        let mut m = DMatrix::zeros(4, 4);
        let c = Complex64::new(0.3, -0.2);
        m[(0, 2)] = c;
        let out = dephasing_superoperator_check(&DensityMatrix {
            entries: m,
            tau: 0.0,
            deficit: 0.0,
        });
        assert_eq!(out[(0, 2)], -2.0 * c);
    }

    #[test]
    fn coherence_decay_rate() {
        // ℋ ≈ 0: the (1,4) coherence decays at 9γ/2
        let p = CavityParams::new(1e-300, 1.0, 0.0)
            .unwrap()
            .with_gamma(0.1)
            .unwrap();
        let mut psi = vec![Complex64::new(0.0, 0.0); 8];
        psi[1] = Complex64::new(0.6, 0.0);
        psi[4] = Complex64::new(0.8, 0.0);
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let out = evolve_lindblad(&rho, &p, 2.0, &LindbladOptions::default()).unwrap();
        let expected = 0.48 * (-4.5 * 0.1 * 2.0f64).exp();
        assert_relative_eq!(out.state.entries[(1, 4)].re, expected, max_relative = 1e-7);
        assert_relative_eq!(out.state.entries[(1, 1)].re, 0.36, epsilon = 1e-12);
    }

    #[test]
    fn unitary_limit_matches_closed_form() {
        let p = params(1.0, 0.5, 0.0);
        let t = p.time_of(ScaledTime::new(1.5).unwrap());
        let out = evolve_lindblad(
            &DensityMatrix::vacuum(256).unwrap(),
            &p,
            t,
            &LindbladOptions::default(),
        )
        .unwrap();
        assert!((out.state.photon_number() - vacuum_photon_number(1.5, 0.5)).abs() < 1e-6);
        assert!(out.trace_deviation.abs() < 1e-8);
        assert!(out.state.hermiticity_error() < 1e-10);
    }

    #[test]
    fn thermal_state_is_stationary_without_pumping() {
        let p = CavityParams::new(1e-300, 1.0, 0.7)
            .unwrap()
            .with_gamma(0.3)
            .unwrap();
        let rho = thermal_state(0.8, 120).unwrap();
        let out = evolve_lindblad(&rho, &p, 5.0, &LindbladOptions::default()).unwrap();
        assert!((&out.state.entries - &rho.entries).norm() < 1e-12);
    }

    #[test]
    fn spectral_path_matches_integrator() {
        let levels = 40;
        let mut psi = vec![Complex64::new(0.0, 0.0); levels];
        psi[0] = Complex64::new(0.6, 0.0);
        psi[1] = Complex64::new(0.0, 0.48);
        psi[2] = Complex64::new(0.64, 0.0);
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let opts = LindbladOptions {
            tol: Tolerances::new(1e-12, 1e-14).unwrap(),
            leak_tol: 1e-3,
            check_positivity: false,
        };
        let times = [0.7, 2.0];
        let exact = evolve_lindblad_sampled(&rho, &params(1.0, 1.6, 0.0), &times, &opts).unwrap();
        let stepped =
            evolve_lindblad_sampled(&rho, &params(1.0, 1.6, 1e-300), &times, &opts).unwrap();
        assert_eq!(exact[1].stats.accepted, 0);
        assert!(stepped[1].stats.accepted > 0);
        for (a, b) in exact.iter().zip(&stepped) {
            assert!((&a.state.entries - &b.state.entries).norm() < 1e-9);
        }
    }

    #[test]
    fn noise_lifts_revival_zero() {
        // Dephasing feeds a power-law photon tail, so the truncated value
        // approaches the moment solution from below as the space grows.
        let p = params(0.8, 1.25, 0.04);
        let tau = crate::closed_form::revival_times(1.25, 1).unwrap()[0];
        let t = p.time_of(ScaledTime::new(tau).unwrap());
        let exact = evolve_moments_scaled(MomentState::vacuum(), 1.25, 0.04, &[tau], 1e-12)
            .unwrap()[0]
            .n_mean;
        let opts = LindbladOptions {
            leak_tol: 1.0,
            ..LindbladOptions::default()
        };
        let mut errs = Vec::new();
        for levels in [32, 64, 128] {
            let out =
                evolve_lindblad(&DensityMatrix::vacuum(levels).unwrap(), &p, t, &opts).unwrap();
            let n = out.state.photon_number();
            assert!(n > 1e-2);
            errs.push(exact - n);
        }
        assert!(
            errs[0] > errs[1] && errs[1] > errs[2] && errs[2] > 0.0,
            "{errs:?}"
        );
        assert!(errs[2] / exact < 0.05, "{errs:?}");
    }

    #[test]
    fn vacuum_never_populates_odd_levels() {
        let p = params(1.0, 1.25, 0.1);
        let times: Vec<f64> = (1..=10).map(|k| k as f64 * 0.8).collect();
        let opts = LindbladOptions {
            leak_tol: 1e-2,
            ..LindbladOptions::default()
        };
        let runs = evolve_lindblad_sampled(&DensityMatrix::vacuum(128).unwrap(), &p, &times, &opts)
            .unwrap();
        for r in &runs {
            assert!(r.state.odd_population() < 1e-12);
        }
    }

    #[test]
    fn purity_is_non_increasing() {
        let p = params(1.0, 1.25, 0.2);
        let times: Vec<f64> = (1..=30).map(|k| k as f64 * 0.4).collect();
        let opts = LindbladOptions {
            leak_tol: 1e-2,
            ..LindbladOptions::default()
        };
        let runs = evolve_lindblad_sampled(&DensityMatrix::vacuum(128).unwrap(), &p, &times, &opts)
            .unwrap();
        let mut prev = 1.0;
        for r in &runs {
            let pur = r.state.purity();
            assert!(pur <= prev + 1e-9);
            prev = pur;
        }
        assert!(prev < 0.999);
    }

    #[test]
    fn truncation_error_is_reported() {
        let p = params(1.0, 0.0, 0.0);
        let t = p.time_of(ScaledTime::new(3.0).unwrap());
        let err = evolve_lindblad(
            &DensityMatrix::vacuum(32).unwrap(),
            &p,
            t,
            &LindbladOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::TruncationInsufficient { .. }));
    }

    #[test]
    fn rejects_unnormalized_state() {
        let m = DMatrix::from_element(3, 3, Complex64::new(0.0, 0.0));
        let rho = DensityMatrix::from_matrix(m).unwrap();
        assert!(evolve_lindblad(
            &rho,
            &params(1.0, 0.5, 0.0),
            1.0,
            &LindbladOptions::default()
        )
        .is_err());
    }

    #[test]
    fn thermal_state_values() {
        let vac = thermal_state(0.0, 5).unwrap();
        assert_eq!(vac.entries[(0, 0)].re, 1.0);
        assert_eq!(vac.photon_number(), 0.0);
        let one = thermal_state(1.0, 60).unwrap();
        for n in 0..10 {
            assert_relative_eq!(
                one.entries[(n, n)].re,
                0.5f64.powi(n as i32 + 1),
                max_relative = 1e-9
            );
        }
        assert!(one.deficit > 0.0 && one.deficit < 1e-10);
        assert!(matches!(
            thermal_state(1.0, 10),
            Err(Error::TailTooHeavy { .. })
        ));
    }

    #[test]
    fn moments_resonant_solution() {
        let taus: Vec<f64> = (0..=20).map(|k| 0.1 * k as f64).collect();
        let traj = evolve_moments_scaled(MomentState::vacuum(), 0.0, 0.0, &taus, 1e-12).unwrap();
        assert_eq!(traj[0], MomentState::vacuum());
        for (tau, m) in taus.iter().zip(&traj) {
            assert!((m.n_mean - tau.sinh().powi(2)).abs() < 1e-10 * (1.0 + m.n_mean));
            let a2 = Complex64::new(0.0, (2.0 * tau).sinh() / 2.0);
            assert!((m.a2 - a2).norm() < 1e-10 * (1.0 + a2.norm()));
            assert!(m.is_physical());
        }
    }

    #[test]
    fn moments_match_closed_form_without_noise() {
        for x in [0.3, 1.0, 1.25, 2.0] {
            let taus: Vec<f64> = (1..=30).map(|k| 0.2 * k as f64).collect();
            let traj = evolve_moments_scaled(MomentState::vacuum(), x, 0.0, &taus, 1e-12).unwrap();
            for (tau, m) in taus.iter().zip(&traj) {
                let n = vacuum_photon_number(*tau, x);
                assert!((m.n_mean - n).abs() < 1e-9 * (1.0 + n), "x={x} tau={tau}");
            }
        }
    }

    #[test]
    fn moments_reject_unphysical_start() {
        let bad = MomentState {
            n_mean: 0.0,
            a2: Complex64::new(0.5, 0.0),
        };
        assert!(evolve_moments_scaled(bad, 0.5, 0.0, &[1.0], 1e-10).is_err());
    }

    #[test]
    fn enhancement_table_layout() {
        let taus = crate::closed_form::revival_times(1.25, 3).unwrap();
        let gammas = [0.0, 0.02, 0.04];
        let table = enhancement_curve(&gammas, 1.25, &taus, 1e-12).unwrap();
        assert_eq!(table.len(), 9);
        for row in table.iter().take(3) {
            assert_eq!(row.gamma_scaled, 0.0);
            assert!(row.n_mean.abs() < 1e-10);
        }
        let first: Vec<f64> = table
            .iter()
            .filter(|r| r.tau_index == 0)
            .map(|r| r.n_mean)
            .collect();
        assert!(first.windows(2).all(|w| w[1] > w[0]));
    }
}
