// Copyright 2026 dce-rs Contributors
// SPDX-License-Identifier: Apache-2.0

//! Photon generation from the vacuum of a parametrically modulated
//! single-mode cavity, and its classical emulation in a semi-infinite
//! waveguide array.
//!
//! Engines:
//!
//! * [`closed_form`]: disentangled evolution operator, photon-number laws,
//!   intensity distribution, revivals and ladder spectrum.
//! * [`fock`]: truncated even/odd Fock-block integration of the amplitude
//!   equations.
//! * [`open_system`]: pure-dephasing master equation and its exact moment
//!   closure.
//! * [`stochastic`]: trajectories with a fluctuating detuning whose ensemble
//!   reproduces the dephasing dynamics.
//! * [`lattice`]: waveguide-array propagation and geometry synthesis.

pub mod closed_form;
pub mod error;
pub mod fock;
pub mod lattice;
pub mod ode;
pub mod open_system;
pub mod params;
pub mod stochastic;

pub use error::{Error, Result};
pub use params::{classify_regime, CavityParams, Regime, ScaledTime};
