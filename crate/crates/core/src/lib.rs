//! Critical delays of linear delay-differential systems
//! `x'(t) = A₀x(t) + Σₖ Aₖx(t − hₖ)`.
//!
//! A delay vector is critical when the characteristic matrix
//! `−sI + A₀ + Σₖ Aₖe^{−hₖs}` is singular at some `s = iω` on the imaginary
//! axis. The search runs over the phases of all but the last delay; at each
//! phase a quadratic matrix pencil of size `n²` is solved, and eigenvalues on
//! the unit circle whose eigenvectors reshape to Hermitian rank-one matrices
//! yield a frequency and a family of delays.
//!
//! * [`free_delay`] handles independent delays.
//! * [`commensurate`] handles delays constrained to a ray `h·(n₁, …, n_m)`.
//! * [`scalar`] gives closed forms for `n = 1`.

// `!(x <= tol)` is used on purpose so that NaN fails the test
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commensurate;
pub mod error;
pub mod free_delay;
pub mod linalg;
pub mod model;
pub mod scalar;

pub use error::{Error, Rejection, Result};
pub use faer;
pub use faer::c64;
pub use model::{DdeSystem, HeatParams};
