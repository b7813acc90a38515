//! Separable exponential-trigonometric models and their training by exact
//! root-finding on the analytically resummed optimality condition.
//!
//! - [`model`]: parameters, atoms and model evaluation
//! - [`calculus`]: gradients, Hessians, the term ledger and `F(Δ)`
//! - [`solvers`]: Infinite Descent (structured Newton-Raphson), steepest
//!   descent and Newton-CG
//! - [`harness`]: demo problem, landscape slices and the verification suite
//! - [`cli`]: configuration files and command implementations

pub mod calculus;
pub mod cli;
pub mod error;
pub mod files;
pub mod harness;
pub mod model;
pub mod solvers;

pub use error::{Error, Result};
