//! Goal-oriented adaptive finite elements for semilinear elliptic problems.
//!
//! This crate solves boundary value problems of the form
//!
//! ```text
//!     -div(A grad u) + b(u) = f - div f_vec   in Omega,   u = 0 on the boundary,
//! ```
//!
//! on intervals and on the unit square, and drives mesh adaptivity towards a
//! goal functional `G(u) = (g, u) + (g_vec, grad u)`. Each adaptive level is
//! the classical loop: solve the primal problem with a damped Newton method,
//! solve the linearised dual problem, compute residual error indicators for
//! both, mark with a minimal-cardinality Dörfler strategy, and refine by
//! newest-vertex bisection.
//!
//! The crate is organised along that pipeline:
//!
//! * [`mesh`] — simplicial meshes, bisection refinement, mesh quality,
//! * [`quadrature`] — Gauss–Legendre, Gauss–Jacobi and triangle rules,
//! * [`space`] — Lagrange finite element spaces and prolongation,
//! * [`problem`] — problem data (coefficients, loads, goal functionals),
//! * [`assembly`] — sparse matrix/vector assembly,
//! * [`solvers`] — sparse Cholesky, damped Newton, dual solve,
//! * [`estimator`] — residual a posteriori error indicators,
//! * [`marking`] — Dörfler marking with exact minimal cardinality,
//! * [`driver`] — the adaptive loop, convergence history and CSV export,
//! * [`vtk`] — legacy-VTK mesh export,
//! * [`cli`] — implementation of the `goafem` command line tool.

// Index-based loops in the numeric kernels mirror the subscripts of the
// formulas they implement; iterator rewrites would obscure them.
#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod cli;
pub mod driver;
pub mod estimator;
pub mod marking;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod solvers;
pub mod space;
pub mod sparse;
pub mod vtk;
