//! Structural-property certification for affine parameter-varying linear
//! systems under structured parametric multi-perturbations.
//!
//! The crate is `no_std` (it needs `alloc`). It covers:
//!
//! - [`cxla`]: a small dense complex linear-algebra kernel (SVD, eigenvalues,
//!   determinants, Kronecker products, row-stacking `vec`).
//! - [`model`]: affine matrix families, perturbation structures, parameter
//!   points and box domains.
//! - [`pbh`]: Popov-Belevitch-Hautus matrices, zero classification and
//!   property checks at points and over domains.
//! - [`robust`]: preservation radii and property-destroying perturbations.
//! - [`cover`]: finite-cover positivity certification on hyper-rectangles.
//! - [`delay`]: point-delay systems, delay lifting and delay tests.
//!
//! Parallel evaluation is abstracted by [`exec::Executor`]; the crate itself
//! only ships a sequential executor.

#![no_std]
// `!(x >= 0.0)` style checks reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod cover;
pub mod cxla;
pub mod delay;
pub mod error;
pub mod exec;
pub mod model;
pub mod pbh;
pub mod robust;

mod fmath;

pub use cxla::{C64, ComplexMatrix};
pub use error::{Error, Result};

/// Default relative tolerance for rank and positivity decisions.
pub const DEFAULT_TOL: f64 = 1e-8;
