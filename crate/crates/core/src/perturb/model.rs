//! `H(y) = y3 - alpha l(y1) l~(y3) phi(rho)` and its closed-form flow.

use std::sync::Arc;

use super::bump::BumpProfile;
use crate::error::{Error, Result};
use crate::symplectic::{Mat4, Vec4};
use crate::system::{Hamiltonian, HamiltonianSystem};

#[derive(Debug, Clone, Copy)]
pub struct BumpRotation {
    pub profile: BumpProfile,
}

impl BumpRotation {
    /// The bump term `B = l l~ phi`, so that `H = y3 - alpha B`.
    pub fn bump(&self, y: &Vec4) -> f64 {
        let p = &self.profile;
        let l = p.ell(y[0])[0];
        if l == 0.0 {
            return 0.0;
        }
        l * p.ell_tilde(y[2])[0] * p.phi(y[1].hypot(y[3]))[0]
    }

    pub fn bump_gradient(&self, y: &Vec4) -> Vec4 {
        let p = &self.profile;
        let l = p.ell(y[0]);
        if l[0] == 0.0 && l[1] == 0.0 {
            return Vec4::zeros();
        }
        let lt = p.ell_tilde(y[2]);
        let rho = y[1].hypot(y[3]);
        let ph = p.phi(rho)[0];
        let s1 = p.psi1(rho);
        Vec4::new(l[1] * lt[0] * ph, l[0] * lt[0] * s1 * y[1], l[0] * lt[1] * ph, l[0] * lt[0] * s1 * y[3])
    }

    pub fn bump_hessian(&self, y: &Vec4) -> Mat4 {
        let p = &self.profile;
        let l = p.ell(y[0]);
        if l[0] == 0.0 && l[1] == 0.0 && l[2] == 0.0 {
            return Mat4::zeros();
        }
        let lt = p.ell_tilde(y[2]);
        let rho = y[1].hypot(y[3]);
        let ph = p.phi(rho)[0];
        let (s1, s2) = (p.psi1(rho), p.psi2(rho));
        // Radial part: d_j Phi = s1 y_j, d_ij Phi = s1 delta_ij + s2 y_i y_j.
        let dphi = [s1 * y[1], s1 * y[3]];
        let ddphi = [[s1 + s2 * y[1] * y[1], s2 * y[1] * y[3]], [s2 * y[1] * y[3], s1 + s2 * y[3] * y[3]]];
        let mut h = Mat4::zeros();
        h[(0, 0)] = l[2] * lt[0] * ph;
        h[(0, 2)] = l[1] * lt[1] * ph;
        h[(2, 2)] = l[0] * lt[2] * ph;
        let idx = [1usize, 3];
        for (a, &i) in idx.iter().enumerate() {
            h[(0, i)] = l[1] * lt[0] * dphi[a];
            h[(2, i)] = l[0] * lt[1] * dphi[a];
            for (b, &j) in idx.iter().enumerate() {
                h[(i, j)] = l[0] * lt[0] * ddphi[a][b];
            }
        }
        for i in 0..4 {
            for j in 0..i {
                h[(i, j)] = h[(j, i)];
            }
        }
        h
    }

    /// Inside the region where `l~ = 1` and `phi = rho^2/2` hold along the orbit.
    pub fn check_validity(&self, y: &Vec4) -> Result<()> {
        let p = &self.profile;
        let inner = p.inner_radius();
        let rho = y[1].hypot(y[3]);
        if !(rho < inner) {
            return Err(Error::Validity(format!("rho = {rho} not below r nu = {inner}")));
        }
        let reach = y[2].abs() + p.alpha * p.phi(rho)[0] * p.ell0;
        if !(reach < inner) {
            return Err(Error::Validity(format!("y3 excursion {reach} not below r nu = {inner}")));
        }
        Ok(())
    }

    pub fn rotation_integral(&self, y1: f64, t: f64) -> f64 {
        self.profile.ell_integral(y1, y1 + t)
    }

    pub fn closed_form(&self, y: &Vec4, t: f64) -> Result<(Vec4, Mat4)> {
        self.check_validity(y)?;
        let p = &self.profile;
        let a = p.alpha;
        let rho2 = y[1] * y[1] + y[3] * y[3];
        let ph = 0.5 * rho2;
        let (l0, l1) = (p.ell(y[0]), p.ell(y[0] + t));
        let dl = l1[0] - l0[0];
        let (s, c) = (a * self.rotation_integral(y[0], t)).sin_cos();
        let z2 = c * y[1] - s * y[3];
        let z4 = s * y[1] + c * y[3];
        let out = Vec4::new(y[0] + t, z2, y[2] + a * ph * dl, z4);
        let d = Mat4::new(
            1.0, 0.0, 0.0, 0.0, //
            -a * dl * z4, c, 0.0, -s, //
            a * ph * (l1[1] - l0[1]), a * y[1] * dl, 1.0, a * y[3] * dl, //
            a * dl * z2, s, 0.0, c,
        );
        Ok((out, d))
    }
}

impl Hamiltonian for BumpRotation {
    fn energy(&self, y: &Vec4) -> f64 {
        y[2] - self.profile.alpha * self.bump(y)
    }

    fn gradient(&self, y: &Vec4) -> Vec4 {
        Vec4::new(0.0, 0.0, 1.0, 0.0) - self.bump_gradient(y) * self.profile.alpha
    }

    fn hessian(&self, y: &Vec4) -> Mat4 {
        self.bump_hessian(y) * -self.profile.alpha
    }

    fn exact_flow(&self, y: &Vec4, t: f64) -> Result<(Vec4, Mat4)> {
        self.closed_form(y, t)
    }

    fn has_exact_flow(&self) -> bool {
        true
    }
}

pub fn bump_rotation_id(p: &BumpProfile) -> String {
    format!("bump-rotation({},{},{})", p.alpha, p.r, p.nu)
}

pub fn build_perturbed_hamiltonian(profile: &BumpProfile) -> HamiltonianSystem {
    HamiltonianSystem::new(bump_rotation_id(profile), Arc::new(BumpRotation { profile: *profile }))
}

/// Closed-form time-`t` map of the perturbed model inside `V_{0,1,r nu}`.
pub fn closed_form_flow(profile: &BumpProfile, y0: &Vec4, t: f64) -> Result<Vec4> {
    Ok(BumpRotation { profile: *profile }.closed_form(y0, t)?.0)
}

pub fn closed_form_tangent(profile: &BumpProfile, y0: &Vec4, t: f64) -> Result<(Vec4, Mat4)> {
    BumpRotation { profile: *profile }.closed_form(y0, t)
}
