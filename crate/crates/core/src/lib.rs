//! Solver and certification toolkit for the Ostrovsky–Hunter equation with a
//! spatially dependent flux on the half-line `x > 0`,
//!
//! ```text
//! u_t + f(x, u)_x = P(t, x) + ε u_xx,    P(t, x) = ∫₀ˣ u(y, t) dy,    u(0, t) = 0.
//! ```
//!
//! The crate is organised bottom-up:
//!
//! - [`flux`]: the flux abstraction `f(x, u)` with its partial derivatives, the
//!   built-in families, entropy/entropy-flux pairs and the machine check of the
//!   structural hypotheses on the flux.
//! - [`grid`]: uniform truncation of the half-line, cell-centred fields and
//!   initial-data projection / mollification.
//! - [`nonlocal`]: the cumulative primitive `P` and its diagnostics.
//! - [`solver`]: method-of-lines time stepping with monotone numerical fluxes
//!   and SSP Runge–Kutta integrators.
//! - [`analysis`]: numerical certification of the energy, entropy and L1
//!   stability estimates on computed runs.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod flux;
pub mod grid;
pub mod nonlocal;
pub mod quadrature;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use flux::{FluxConstants, FluxFamily, FluxModel, FluxSpec};
pub use grid::{Field, Grid, InitialData};
pub use nonlocal::Primitive;
pub use solver::{Integrator, NumericalFluxKind, RunHistory, SolverConfig};
