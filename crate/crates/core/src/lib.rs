//! Hamiltonian flows on R^4: transversal linear Poincare cocycles, Lyapunov
//! exponents, dominated splittings, and local perturbations that rotate the
//! transversal cocycle.

// `!(x < y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod cli;
pub mod config;
pub mod domination;
pub mod error;
pub mod flow;
pub mod flowbox;
pub mod frame;
pub mod lyapunov;
pub mod perturb;
pub mod poincare;
pub mod quad;
pub mod sampling;
pub mod symplectic;
pub mod system;

pub use error::{Error, Result};
pub use symplectic::{Mat2, Mat4, Phase4, Vec2, Vec4};
pub use system::{Hamiltonian, HamiltonianSystem};
