//! Variational integrator for point-particle initial value problems.
//!
//! The trajectory `(t(γ), x(γ))` of a particle is obtained as the critical
//! point of a doubled (forward minus backward) discrete world-line action
//! built from summation-by-parts operators, with eight Lagrange multipliers
//! enforcing the initial and connecting conditions. The crate provides
//!
//! - [`sbp`]: grids, SBP21/SBP42 derivative and quadrature operators,
//!   regularized derivatives and discrete delta (lifting) vectors,
//! - [`action`]: the constrained action with its exact gradient and Hessian,
//! - [`solver`]: damped Newton iteration on the gradient with ε-continuation,
//! - [`diagnostics`]: the multiplier-corrected Noether charge, corrected and
//!   naive geodesic residuals, emergent time spacing and an ODE oracle for
//!   convergence studies,
//! - [`acceptance`]: the end-to-end verification checks used by `worldline verify`.
//!
//! Interchangeable pieces (operator families, kinetic-derivative
//! regularizers, potentials) are registered by name in a [`Registry`] and
//! resolved from configuration strings at runtime.

pub mod acceptance;
pub mod action;
pub mod diagnostics;
mod error;
pub mod potential;
pub mod problem;
pub mod regularizer;
mod registry;
pub mod sbp;
pub mod solver;

pub use action::{assemble_action, assemble_gradient, assemble_hessian, metric_diag, Action, ActionEvaluation, UnknownVector};
pub use error::{Error, Result};
pub use potential::{Potential, PotentialSpec};
pub use problem::{DiagnosticOptions, InitialData, PhysicsParams, Problem, ProblemSpec};
pub use regularizer::{KineticOperator, Regularizer};
pub use registry::Registry;
pub use sbp::{build_grid, build_regularized, build_sbp, lifting, Grid, LiftingVector, OperatorOrder, SbpFamily, SbpOperatorSet};
pub use solver::{initial_guess, newton_solve, solve, solve_physical, EpsilonPolicy, PhysicalSolution, SolveResult, SolveStatus, SolverSettings};
