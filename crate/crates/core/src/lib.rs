//! Symbolic-numeric analysis of integrable Hamiltonian systems on `R^2n`.
//!
//! The crate is organized bottom-up:
//!
//! - [`expr`]: the expression language integrals are written in.
//! - [`hamsys`]: Poisson brackets, Hamiltonian vector fields, involution,
//!   rank and commutant tests.
//! - [`flow`]: RK4 flows, conservation, orbit exploration and a
//!   completeness probe.
//! - [`fiber`]: grid-sampled fibers of the integral map and their
//!   connected components.
//! - [`dspace`]: the discretized orbit space with its projection and
//!   induced map, plus equivalence and closedness checks.

pub mod dspace;
pub mod expr;
pub mod fiber;
pub mod flow;
pub mod hamsys;
pub mod phase;

pub use expr::{parse, Expr, VariableList};
pub use hamsys::IntegrableSystem;
pub use phase::PhaseBox;
