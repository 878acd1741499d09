//! Time integration of the flow and of its differential.

mod integrator;
pub mod io;

pub use integrator::{integrate, integrate_tangent, step, IntegratorConfig, Method};

use crate::error::{Error, Result};
use crate::symplectic::{symplectic_residual, Mat4, Vec4};
use crate::system::HamiltonianSystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentState {
    pub y: Vec4,
    pub f: Mat4,
    pub t: f64,
}

impl TangentState {
    pub fn identity(y: Vec4) -> Self {
        Self { y, f: Mat4::identity(), t: 0.0 }
    }

    pub fn symplectic_residual(&self) -> f64 {
        symplectic_residual(&self.f)
    }
}

#[derive(Debug, Clone, Default)]
pub struct OrbitSegment {
    pub times: Vec<f64>,
    pub states: Vec<TangentState>,
}

impl OrbitSegment {
    pub fn last(&self) -> &TangentState {
        self.states.last().expect("orbit segment always holds the initial state")
    }
}

/// Exact flow and differential for systems with a closed form.
pub fn reference_flow(sys: &HamiltonianSystem, y0: &Vec4, t: f64) -> Result<(Vec4, Mat4)> {
    if !sys.has_exact_flow() {
        return Err(Error::Unsupported(format!("{} has no closed-form flow", sys.id)));
    }
    sys.exact_flow(y0, t)
}
