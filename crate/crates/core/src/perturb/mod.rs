//! The explicit local perturbation of the straightened model `H0(y) = y3`.

mod bump;
mod certify;
mod model;

pub use bump::{build_bumps, smoothstep, BumpProfile, Jet, ProfileBounds, Tube, Universal};
pub use certify::{
    c3_blowup_probe, certificate_report, certify, disk_points, fiber_block, grid_values, write_grid_csv, PerturbationCertificate,
    C_U_MAX, MIN_GRID,
};
pub use model::{build_perturbed_hamiltonian, bump_rotation_id, closed_form_flow, closed_form_tangent, BumpRotation};
