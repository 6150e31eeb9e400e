// Copyright 2026 dce-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Physical parameters of the modulated single-mode cavity.
//!
//! The reduced Hamiltonian is
//!
//! ```text
//!     ℋ = −(εω₀/4)(a†² + a²) − (K/2) a†a
//! ```
//!
//! so only the product εω₀ and the shift K enter the dynamics. The
//! dimensionless detuning ratio `x = K/(εω₀)` selects the regime, and the
//! scaled time `τ = εω₀t/2` is the natural clock of every closed form.

use std::fmt;

use crate::error::{Error, Result};

/// Default half-width of the threshold band around `|x| = 1`.
pub const DEFAULT_THRESHOLD_TOL: f64 = 1e-12;

/// Physical knobs of the cavity: modulation depth, mode frequency, detuning
/// shift, pure-dephasing rate and initial thermal occupation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams {
    epsilon: f64,
    omega0: f64,
    k: f64,
    gamma: f64,
    nbar_th: f64,
}

impl CavityParams {
    pub fn new(epsilon: f64, omega0: f64, k: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid(
                "epsilon",
                format!("must be > 0, got {epsilon}"),
            ));
        }
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::invalid(
                "omega0",
                format!("must be > 0, got {omega0}"),
            ));
        }
        if !k.is_finite() {
            return Err(Error::invalid("K", format!("must be finite, got {k}")));
        }
        let x = k / (epsilon * omega0);
        if !x.is_finite() {
            return Err(Error::invalid("K", "detuning ratio K/(εω₀) is not finite"));
        }
        Ok(Self {
            epsilon,
            omega0,
            k,
            gamma: 0.0,
            nbar_th: 0.0,
        })
    }

    /// Parameters from the modulation product `εω₀` and detuning ratio `x`.
    /// Sets ω₀ = 1, so `epsilon` carries the whole product.
    pub fn from_ratio(eps_omega0: f64, x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::invalid("x", format!("must be finite, got {x}")));
        }
        Self::new(eps_omega0, 1.0, x * eps_omega0)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid(
                "gamma",
                format!("must be >= 0, got {gamma}"),
            ));
        }
        self.gamma = gamma;
        Ok(self)
    }

    /// Sets γ from the scaled rate `2γ/(εω₀)`.
    pub fn with_scaled_gamma(self, gamma_scaled: f64) -> Result<Self> {
        if !(gamma_scaled.is_finite() && gamma_scaled >= 0.0) {
            return Err(Error::invalid(
                "gamma_scaled",
                format!("must be >= 0, got {gamma_scaled}"),
            ));
        }
        let g = gamma_scaled * self.eps_omega0() / 2.0;
        self.with_gamma(g)
    }

    pub fn with_thermal(mut self, nbar_th: f64) -> Result<Self> {
        if !(nbar_th.is_finite() && nbar_th >= 0.0) {
            return Err(Error::invalid(
                "nbar_th",
                format!("must be >= 0, got {nbar_th}"),
            ));
        }
        self.nbar_th = nbar_th;
        Ok(self)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    /// Signed detuning shift K.
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn nbar_th(&self) -> f64 {
        self.nbar_th
    }

    pub fn eps_omega0(&self) -> f64 {
        self.epsilon * self.omega0
    }

    /// Detuning ratio `x = K/(εω₀)`.
    pub fn x(&self) -> f64 {
        self.k / self.eps_omega0()
    }

    /// Scaled dephasing rate `2γ/(εω₀)`.
    pub fn gamma_scaled(&self) -> f64 {
        2.0 * self.gamma / self.eps_omega0()
    }

    /// Physical time corresponding to a scaled time.
    pub fn time_of(&self, tau: ScaledTime) -> f64 {
        2.0 * tau.0 / self.eps_omega0()
    }

    pub fn scaled_time_of(&self, t: f64) -> Result<ScaledTime> {
        ScaledTime::new(self.eps_omega0() * t / 2.0)
    }
}

/// Phase of the equivalent lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `|x| < 1`: exponential photon growth, delocalized lattice propagation.
    Metal,
    /// `|x| = 1`: quadratic growth.
    Threshold,
    /// `|x| > 1`: bounded, oscillating production with Bloch-like revivals.
    Insulator,
}

impl Regime {
    pub fn from_ratio(x: f64, tol: f64) -> Self {
        let ax = x.abs();
        if ax < 1.0 - tol {
            Regime::Metal
        } else if ax > 1.0 + tol {
            Regime::Insulator
        } else {
            Regime::Threshold
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::Metal => "Metal",
            Regime::Threshold => "Threshold",
            Regime::Insulator => "Insulator",
        };
        f.write_str(s)
    }
}

pub fn classify_regime(p: &CavityParams) -> Regime {
    Regime::from_ratio(p.x(), DEFAULT_THRESHOLD_TOL)
}

pub fn classify_regime_with_tol(p: &CavityParams, tol: f64) -> Regime {
    Regime::from_ratio(p.x(), tol)
}

/// Dimensionless time `τ = εω₀t/2`; identical to the lattice coordinate
/// `Z = 2C₁z`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ScaledTime(f64);

impl ScaledTime {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::invalid("tau", format!("must be >= 0, got {tau}")));
        }
        Ok(Self(tau))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}
