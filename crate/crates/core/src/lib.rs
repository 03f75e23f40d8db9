// SPDX-License-Identifier: Apache-2.0

//! Numerical toolkit for disordered pinning and copolymer models: exact
//! transfer recursions for the quenched partition function, brute-force
//! oracles, pure-model asymptotics, replica estimators and the analysis of
//! critical behaviour.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::excessive_precision)]

pub mod analysis;
pub mod disorder;
pub mod engine;
pub mod error;
pub mod estimator;
pub mod kernel;
pub mod numeric;
pub mod oracle;
pub mod pure_solver;

pub use error::{Error, Result};
pub use kernel::{
    geometric_kernel, geometric_kernel_with, kernel_from_file, power_kernel, srw_kernel, IdealLaw,
    KernelSpec, ReturnKernel,
};
