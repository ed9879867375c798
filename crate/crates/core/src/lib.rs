//! Numerical toolkit for fractional-order dynamical systems.
//!
//! * [`mittag_leffler`]: two- and three-parameter Mittag-Leffler functions.
//! * [`operators`]: Riemann–Liouville integral and the Caputo,
//!   Caputo–Fabrizio and Atangana–Baleanu–Caputo derivatives on uniform grids.
//! * [`solvers`]: initial-value solvers for each derivative family.
//! * [`lyapunov`]: Lyapunov building blocks and numerical checks of the
//!   fractional-derivative estimates along trajectories.
//! * [`seir`]: fractional SEIR model with general incidence, equilibria,
//!   R0 and the Lyapunov functionals used for its stability analysis.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod lyapunov;
pub mod mittag_leffler;
pub mod operators;
pub mod quadrature;
pub mod seir;
pub mod solvers;
pub mod special;
pub mod trajectory;
