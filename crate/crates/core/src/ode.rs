// Copyright 2026 dce-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Adaptive Dormand–Prince 5(4) integrator for complex state vectors.
//!
//! Every engine in this crate reduces to `dy/dt = f(t, y)` with `y` a flat
//! slice of `Complex64` (amplitudes, a vectorized density-matrix block, or
//! the moment triple), so one integrator serves them all.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Error-control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Steps below this magnitude abort the integration.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Result<Self> {
        if !(rtol.is_finite() && rtol > 0.0) {
            return Err(Error::invalid("rtol", format!("must be > 0, got {rtol}")));
        }
        if !(atol.is_finite() && atol >= 0.0) {
            return Err(Error::invalid("atol", format!("must be >= 0, got {atol}")));
        }
        Ok(Self {
            rtol,
            atol,
            ..Self::default()
        })
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_min: 1e-14,
            max_steps: 50_000_000,
        }
    }
}

/// Work counters of one integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// difference between the 5th- and embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
/// Largest `|Re Λ|·h` allowed in a split step.
const MAX_DECAY_EXPONENT: f64 = 200.0;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

/// Reusable stage buffers.
pub struct Dopri5 {
    tol: Tolerances,
    k: [Vec<Complex64>; 7],
    stage: Vec<Complex64>,
    y_new: Vec<Complex64>,
    work: Vec<Complex64>,
    h_last: Option<f64>,
}

impl Dopri5 {
    pub fn new(dim: usize, tol: Tolerances) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            tol,
            k: std::array::from_fn(|_| vec![z; dim]),
            stage: vec![z; dim],
            y_new: vec![z; dim],
            work: vec![z; dim],
            h_last: None,
        }
    }

    /// Integrates `y` from `t0` to `t1` in place (either direction).
    /// `on_step(t, y)` is called after every accepted step; an error from it
    /// stops the integration and is returned.
    pub fn integrate<F, O>(
        &mut self,
        f: F,
        t0: f64,
        t1: f64,
        y: &mut [Complex64],
        on_step: O,
    ) -> Result<Stats>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
        O: FnMut(f64, &[Complex64]) -> Result<()>,
    {
        self.integrate_split(f, |_, _| {}, 0.0, t0, t1, y, on_step)
    }

    /// Integrates `dy/dt = Λy + f(t, y)` with `Λ` diagonal, treating `Λ`
    /// exactly through the integrating factor (Lawson scheme).
    ///
    /// `expo(s, v)` must multiply `v` in place by `exp(Λs)` for either sign
    /// of `s`; `decay_bound` bounds `max |Re Λ|` and limits the step so the
    /// factors stay representable.
    #[allow(clippy::too_many_arguments)]
    pub fn integrate_split<F, E, O>(
        &mut self,
        mut f: F,
        mut expo: E,
        decay_bound: f64,
        t0: f64,
        t1: f64,
        y: &mut [Complex64],
        mut on_step: O,
    ) -> Result<Stats>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
        E: FnMut(f64, &mut [Complex64]),
        O: FnMut(f64, &[Complex64]) -> Result<()>,
    {
        let n = y.len();
        assert_eq!(n, self.stage.len(), "state dimension mismatch");
        let mut stats = Stats::default();
        if t1 == t0 || n == 0 {
            return Ok(stats);
        }
        let dir = (t1 - t0).signum();
        let span = (t1 - t0).abs();
        let h_cap = if decay_bound > 0.0 {
            MAX_DECAY_EXPONENT / decay_bound
        } else {
            f64::INFINITY
        };

        f(t0, y, &mut self.k[0]);
        stats.evaluations += 1;

        let mut h = match self.h_last {
            Some(h) => h.min(span),
            None => self.initial_step(&mut f, t0, y, dir, &mut stats).min(span),
        }
        .min(h_cap);
        let mut t = t0;

        loop {
            let remaining = (t1 - t).abs();
            if remaining <= 1e-15 * span.max(t1.abs()) {
                break;
            }
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            if h < self.tol.h_min {
                return Err(Error::Integrator(format!(
                    "step size {h:.3e} underflow at t = {t}"
                )));
            }
            if stats.accepted + stats.rejected >= self.tol.max_steps {
                return Err(Error::Integrator(format!(
                    "step budget {} exhausted at t = {t}",
                    self.tol.max_steps
                )));
            }

            let err = self.attempt(&mut f, &mut expo, t, dir * h, y);
            stats.evaluations += 6;

            if err <= 1.0 {
                t = if last { t1 } else { t + dir * h };
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                stats.accepted += 1;
                on_step(t, y)?;
                let fac = if err == 0.0 {
                    FAC_MAX
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
                };
                let next = (h * fac).min(h_cap);
                if !last {
                    self.h_last = Some(next);
                }
                h = next;
                if last {
                    break;
                }
            } else {
                stats.rejected += 1;
                h *= (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0);
            }
        }
        Ok(stats)
    }

    /// One trial step of size `h` (signed). Leaves the 5th-order result in
    /// `y_new`, `f(t+h, y_new)` in `k[6]`, and returns the scaled error norm.
    /// Stages live in the frame `exp(−Λs)y`; with the identity transform this
    /// is the plain Dormand–Prince step.
    fn attempt<F, E>(&mut self, f: &mut F, expo: &mut E, t: f64, h: f64, y: &[Complex64]) -> f64
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
        E: FnMut(f64, &mut [Complex64]),
    {
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let stage = &mut self.stage;
        let work = &mut self.work;

        let mut eval = |c: f64, stage: &mut [Complex64], k: &mut [Complex64]| {
            expo(c * h, stage);
            f(t + c * h, stage, k);
            expo(-c * h, k);
        };

        for i in 0..y.len() {
            stage[i] = y[i] + h * A21 * k1[i];
        }
        eval(C2, stage, k2);
        for i in 0..y.len() {
            stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        eval(C3, stage, k3);
        for i in 0..y.len() {
            stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        eval(C4, stage, k4);
        for i in 0..y.len() {
            stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        eval(C5, stage, k5);
        for i in 0..y.len() {
            stage[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        eval(1.0, stage, k6);
        let y_new = &mut self.y_new;
        for i in 0..y.len() {
            y_new[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        expo(h, y_new);
        // k7 keeps the untransformed derivative for the next step's k1
        f(t + h, y_new, k7);
        work.copy_from_slice(k7);
        expo(-h, work);

        for i in 0..y.len() {
            work[i] =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * work[i]);
        }
        expo(h, work);
        let mut acc = 0.0;
        for i in 0..y.len() {
            let sc = self.tol.atol + self.tol.rtol * y[i].norm().max(y_new[i].norm());
            acc += work[i].norm_sqr() / (sc * sc);
        }
        let err = (acc / y.len() as f64).sqrt();
        if err.is_finite() {
            err
        } else {
            f64::INFINITY
        }
    }

    /// Starting step from the derivative scales (Hairer, Nørsett & Wanner).
    fn initial_step<F>(
        &mut self,
        f: &mut F,
        t0: f64,
        y: &[Complex64],
        dir: f64,
        stats: &mut Stats,
    ) -> f64
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let n = y.len() as f64;
        let sc = |v: &Complex64| self.tol.atol + self.tol.rtol * v.norm();
        let d0 = (y.iter().map(|v| (v.norm() / sc(v)).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (y
            .iter()
            .zip(&self.k[0])
            .map(|(v, d)| (d.norm() / sc(v)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        for i in 0..y.len() {
            self.stage[i] = y[i] + dir * h0 * self.k[0][i];
        }
        f(t0 + dir * h0, &self.stage, &mut self.k[1]);
        stats.evaluations += 1;
        let d2 = (y
            .iter()
            .zip(self.k[1].iter().zip(&self.k[0]))
            .map(|(v, (a, b))| ((a - b).norm() / sc(v)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1)
    }
}

/// Integrates once with fresh buffers.
pub fn integrate<F>(f: F, t0: f64, t1: f64, y: &mut [Complex64], tol: Tolerances) -> Result<Stats>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    Dopri5::new(y.len(), tol).integrate(f, t0, t1, y, |_, _| Ok(()))
}
