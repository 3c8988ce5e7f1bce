#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
//! Finite-difference solvers for the 1D inhomogeneous damped wave equation
//!
//! ```text
//! u_tt = u_xx - gamma(x) u_t + g(x, t),   a <= x <= b
//! ```
//!
//! with Dirichlet boundary data and initial displacement/velocity.
//!
//! Space is discretized with the central three-point Laplacian, giving the
//! first-order system `V' = M V + F(t)` with `M = [[0, I], [A/h^2, -Gamma]]`.
//! A time step replaces `exp(kM)` by a Padé approximant `P_T/Q_S` and the
//! Duhamel integral by the trapezoidal rule:
//!
//! ```text
//! Q_S(kM) V^{n+1} = P_T(kM) V^n + (k/2) [P_T(kM) F(t_n) + Q_S(kM) F(t_{n+1})]
//! ```
//!
//! `(S,T) = (0,1)` is the explicit FD-(0,1) scheme and `(1,1)` the implicit,
//! unconditionally stable FD-(1,1) scheme. The ordinary explicit and implicit
//! three-level schemes (OEFD/OIFD) are provided as baselines.
//!
//! Modules:
//!
//! * [operators] grid, block operator `M` and forcing vector `F(t)`
//! * [pade] exact rational Padé coefficients and their application to `M`
//! * [linalg] banded LU, power iteration, dense matrix-exponential oracle
//! * [schemes] steppers and the evolution driver
//! * [stability] Jury test, explicit stability region, implicit amplification factors
//! * [problems] problem records, built-in catalog, expression language, JSON configs
//! * [harness] error profiles, convergence studies, table reproduction, CSV output
//! * [cli] the `dampwave` command-line frontend

pub mod cli;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod operators;
pub mod pade;
pub mod problems;
pub mod schemes;
pub mod stability;

pub use error::{Error, Result};
