// Copyright 2026 dce-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Closed-form analytics of the squeezing Hamiltonian.
//!
//! The evolution operator factorizes (up to the global phase `e^{−iKt/4}`,
//! which is dropped everywhere since it cancels in every observable) as
//!
//! ```text
//!     U(t) = β₀^{1/4} exp(β a†²) exp(a†a ln β₀) exp(β a²)
//!     β₀   = [cosh(ητ) − i(x/η) sinh(ητ)]⁻²
//!     β    = i β₀^{1/2} sinh(ητ) / (2η)
//!     η    = √(1 − x²)            (principal branch)
//! ```
//!
//! and the vacuum photon number is `sinh²(ητ)/η²`, evaluated below on the
//! real branch appropriate to each regime. Every `sinh(ητ)/η` is computed as
//! `τ·sinhc(ητ)` so the threshold `x = 1` needs no special casing beyond a
//! series for small arguments.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Coefficients of the disentangled evolution operator at one scaled time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UCoefficients {
    pub beta: Complex64,
    pub beta0: Complex64,
    /// Principal square root of `1 − x²`: real in (0, 1] for |x| < 1,
    /// purely imaginary for |x| > 1, zero at threshold.
    pub eta: Complex64,
}

impl UCoefficients {
    /// `−4β²/β₀`, the vacuum photon number as a complex number. The
    /// imaginary part is round-off.
    pub fn photon_number(&self) -> Complex64 {
        -4.0 * self.beta * self.beta / self.beta0
    }
}

/// `sinh(z)/z` for complex `z`.
fn sinhc(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        let z2 = z * z;
        Complex64::new(1.0, 0.0) + z2 / 6.0 + z2 * z2 / 120.0 + z2 * z2 * z2 / 5040.0
    } else {
        z.sinh() / z
    }
}

fn sinhc_real(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        let z2 = z * z;
        1.0 + z2 / 6.0 + z2 * z2 / 120.0 + z2 * z2 * z2 / 5040.0
    } else {
        z.sinh() / z
    }
}

fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0 - z2 * z2 * z2 / 5040.0
    } else {
        z.sin() / z
    }
}

/// `1 − x²` without cancellation near |x| = 1.
fn one_minus_x2(x: f64) -> f64 {
    (1.0 - x) * (1.0 + x)
}

/// The denominator `D = cosh(ητ) − i x sinh(ητ)/η` and `s = sinh(ητ)/η`.
fn denominator(tau: f64, x: f64) -> (Complex64, Complex64, Complex64) {
    let eta = Complex64::new(one_minus_x2(x), 0.0).sqrt();
    let z = eta * tau;
    let s = sinhc(z) * tau;
    let d = z.cosh() - Complex64::i() * x * s;
    (eta, s, d)
}

/// `D^{-1/2}` continuous in τ. For |x| > 1 the curve `D(τ)` is an ellipse
/// winding around the origin, so the argument is unwrapped; elsewhere
/// `Re D ≥ 1` and the principal branch is already continuous.
fn inv_sqrt_denominator(tau: f64, x: f64, d: Complex64) -> Complex64 {
    let arg = if x.abs() > 1.0 {
        let a = (-one_minus_x2(x)).sqrt();
        let theta = a * tau;
        let turns = (theta / (2.0 * PI)).round();
        let reduced = theta - 2.0 * PI * turns;
        // D = cos θ − i (x/a) sin θ
        let psi = (-(x / a) * reduced.sin()).atan2(reduced.cos());
        psi - 2.0 * PI * turns * x.signum()
    } else {
        d.arg()
    };
    Complex64::from_polar(d.norm().powf(-0.5), -arg / 2.0)
}

/// Evolution-operator coefficients at scaled time `tau` and ratio `x`.
pub fn u_coefficients(tau: f64, x: f64) -> UCoefficients {
    let (eta, s, d) = denominator(tau, x);
    let inv_d = d.inv();
    UCoefficients {
        beta: Complex64::i() * inv_d * s / 2.0,
        beta0: inv_d * inv_d,
        eta,
    }
}

/// Vacuum photon number `sinh²(ητ)/η²` on the real branch for each regime:
/// exponential for |x| < 1, `τ²` at threshold, `sin²(τ√(x²−1))/(x²−1)` above.
pub fn vacuum_photon_number(tau: f64, x: f64) -> f64 {
    let e2 = one_minus_x2(x);
    let s = if e2 > 0.0 {
        tau * sinhc_real(tau * e2.sqrt())
    } else if e2 < 0.0 {
        tau * sinc(tau * (-e2).sqrt())
    } else {
        tau
    };
    s * s
}

/// Even Fock amplitudes `A_{2m}` of the evolved vacuum, `m = 0..=m_max`.
///
/// `A_{2m} = β₀^{1/4} β^m √((2m)!)/m!`, built by the ratio recurrence
/// `A_{2m}/A_{2m−2} = β √(2m(2m−1))/m` so large `m` never overflows. The
/// global phase `e^{−iKt/4}` (equal to `e^{−ixτ/2}`) is not included.
pub fn vacuum_amplitudes(tau: f64, x: f64, m_max: usize) -> Result<Vec<Complex64>> {
    if m_max < 1 {
        return Err(Error::invalid("m_max", "must be >= 1"));
    }
    let (_, s, d) = denominator(tau, x);
    let beta = Complex64::i() * d.inv() * s / 2.0;
    let mut amps = Vec::with_capacity(m_max + 1);
    let mut a = inv_sqrt_denominator(tau, x, d);
    amps.push(a);
    for m in 1..=m_max {
        let mf = m as f64;
        a *= beta * ((2.0 * mf) * (2.0 * mf - 1.0)).sqrt() / mf;
        amps.push(a);
    }
    Ok(amps)
}

/// Ratio `I_m/I_{m−1}` of the intensity distribution.
fn intensity_ratio(m: usize, n_mean: f64) -> f64 {
    let mf = m as f64;
    (2.0 * mf - 1.0) / (2.0 * mf) * n_mean / (1.0 + n_mean)
}

/// Probability of finding the excitation at waveguide `m` (Fock state
/// `|2m⟩`) when the vacuum has evolved to mean photon number `n_mean`:
///
/// ```text
///     I_m = (2m)!/(2^m m!)² · n^m / (1+n)^{m+1/2}
/// ```
pub fn intensity_distribution(m: usize, n_mean: f64) -> f64 {
    let mut i = (1.0 + n_mean).powf(-0.5);
    for k in 1..=m {
        i *= intensity_ratio(k, n_mean);
        if i == 0.0 {
            break;
        }
    }
    i
}

/// `[I_0, …, I_{m_max}]` in one pass.
pub fn intensity_profile(m_max: usize, n_mean: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m_max + 1);
    let mut i = (1.0 + n_mean).powf(-0.5);
    out.push(i);
    for k in 1..=m_max {
        i *= intensity_ratio(k, n_mean);
        out.push(i);
    }
    out
}

/// Upper bound on `Σ_{m>m_max} I_m` from the geometric ratio bound
/// `I_m/I_{m−1} < n/(1+n)`.
pub fn intensity_tail_bound(m_max: usize, n_mean: f64) -> f64 {
    let q = n_mean / (1.0 + n_mean);
    intensity_distribution(m_max + 1, n_mean) / (1.0 - q)
}

/// Photon number at scaled time `tau` starting from Fock state `|n⟩`.
pub fn fock_photon_number(n: u64, tau: f64, x: f64) -> f64 {
    let nf = n as f64;
    (1.0 + 2.0 * nf) * vacuum_photon_number(tau, x) + nf
}

/// Photon number starting from a thermal field with mean occupation `nbar`.
pub fn thermal_photon_number(nbar: f64, tau: f64, x: f64) -> Result<f64> {
    if !(nbar.is_finite() && nbar >= 0.0) {
        return Err(Error::invalid("nbar", format!("must be >= 0, got {nbar}")));
    }
    Ok((1.0 + 2.0 * nbar) * vacuum_photon_number(tau, x) + nbar)
}

/// Bose–Einstein occupation `1/(e^{ω/T} − 1)` in units ħ = k_B = 1.
/// `T = 0` gives exactly 0.
pub fn thermal_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::invalid("omega", format!("must be > 0, got {omega}")));
    }
    if !(temperature.is_finite() && temperature >= 0.0) {
        return Err(Error::invalid(
            "temperature",
            format!("must be >= 0, got {temperature}"),
        ));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (omega / temperature).exp_m1())
}

/// Bloch-like revival times `nπ/√(x²−1)`, `n = 1..=n_max`, in scaled time.
pub fn revival_times(x: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(x.abs() > 1.0) {
        return Err(Error::Domain(format!(
            "no revivals in metal phase or at threshold (x = {x})"
        )));
    }
    let a = (-one_minus_x2(x)).sqrt();
    Ok((1..=n_max).map(|n| n as f64 * PI / a).collect())
}

/// Squeeze parameter of the diagonalizing transformation and the level
/// spacing of the resulting ladder spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderSpectrum {
    pub r: f64,
    pub spacing: f64,
}

/// For `x > 1`, `r = ¼ ln[(x−1)/(x+1)]` and the (full Fock space) level
/// spacing is `(εω₀/2)√(x²−1)`.
pub fn squeeze_parameter_and_spacing(x: f64, eps_omega0: f64) -> Result<LadderSpectrum> {
    if !(x > 1.0) {
        return Err(Error::Domain(format!(
            "spectrum is continuous or coalescent for x = {x} <= 1"
        )));
    }
    if !(eps_omega0.is_finite() && eps_omega0 > 0.0) {
        return Err(Error::invalid("eps_omega0", "must be > 0"));
    }
    Ok(LadderSpectrum {
        r: 0.25 * ((x - 1.0) / (x + 1.0)).ln(),
        spacing: 0.5 * eps_omega0 * (-one_minus_x2(x)).sqrt(),
    })
}
