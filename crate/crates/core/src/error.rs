// Copyright 2026 dce-rs Contributors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the simulation engines.
///
/// Variants split into two families: input problems (`InvalidParameter`,
/// `Domain`) and numerical problems that surface at run time. The CLI maps
/// the former to exit status 2 and the latter to 3.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "truncation insufficient: leakage {leakage:.3e} in top levels exceeds tolerance {tol:.3e} (dimension {dim})"
    )]
    TruncationInsufficient { leakage: f64, tol: f64, dim: usize },

    #[error("resource limit: required dimension exceeds cap {cap}")]
    ResourceLimit { cap: usize },

    #[error("integrator failure: {0}")]
    Integrator(String),

    #[error("norm drift {drift:.3e} exceeds tolerance {tol:.3e}")]
    NormDrift { drift: f64, tol: f64 },

    #[error("positivity violated: minimum eigenvalue {min_eig:.3e}")]
    Positivity { min_eig: f64 },

    #[error("thermal tail {tail:.3e} too heavy for {levels} levels")]
    TailTooHeavy { tail: f64, levels: usize },

    #[error("design error: {0}")]
    Design(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::Domain(_) | Error::Design(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
