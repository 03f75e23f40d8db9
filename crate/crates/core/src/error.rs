// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the depinning toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("kernel file {path}: line {line}: {reason}")]
    KernelFile {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("kernel mass {total} does not sum to 1 (tolerance {tolerance})")]
    Normalization { total: f64, tolerance: f64 },

    #[error("length {n} is not a multiple of the kernel period {period}")]
    NotMultipleOfPeriod { n: usize, period: usize },

    #[error("disorder sample has {have} values, need at least {need}")]
    DisorderTooShort { have: usize, need: usize },

    #[error("oracle guard exceeded: N = {n} > {guard}")]
    OracleGuard { n: usize, guard: usize },

    #[error("{0}")]
    Unsupported(String),

    #[error("no critical bracket in [{lo}, {hi}]: {reason}")]
    BracketNotFound { lo: f64, hi: f64, reason: String },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("all entries of the curve are infeasible")]
    Infeasible,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
