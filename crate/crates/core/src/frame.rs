//! Orthonormal frames of the transversal fiber `N_x ∩ ker dH(x)`.

use crate::error::{Error, Result};
use crate::symplectic::{apply_j, omega, Vec2, Vec4};
use crate::system::HamiltonianSystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransversalFrame {
    pub base: Vec4,
    pub u1: Vec4,
    pub u2: Vec4,
    pub xdir: Vec4,
    pub gdir: Vec4,
}

const TIE_TOL: f64 = 1e-9;

impl TransversalFrame {
    /// Deterministic frame: `u1` is the projection of the first coordinate axis
    /// with the largest projection, `u2 = -J u1` so that `w0(u1, u2) = 1`.
    pub fn at(sys: &HamiltonianSystem, y: &Vec4) -> Result<Self> {
        let (xdir, gdir) = directions(sys, y)?;
        let proj = |v: Vec4| v - xdir * xdir.dot(&v) - gdir * gdir.dot(&v);
        let mut best = (0usize, -1.0f64);
        for k in 0..4 {
            let n = proj(Vec4::ith(k, 1.0)).norm();
            if n > best.1 * (1.0 + TIE_TOL) {
                best = (k, n);
            }
        }
        let u1 = proj(Vec4::ith(best.0, 1.0)).normalize();
        Ok(Self::complete(*y, u1, xdir, gdir))
    }

    /// Frame at `y` whose `u1` is the projection of `reference` onto the fiber.
    /// Used to compare maps at nearby base points without tie-break jumps.
    pub fn aligned(sys: &HamiltonianSystem, y: &Vec4, reference: &Vec4) -> Result<Self> {
        let (xdir, gdir) = directions(sys, y)?;
        let v = reference - xdir * xdir.dot(reference) - gdir * gdir.dot(reference);
        if v.norm() < 1e-6 * reference.norm() {
            return Self::at(sys, y);
        }
        Ok(Self::complete(*y, v.normalize(), xdir, gdir))
    }

    fn complete(base: Vec4, u1: Vec4, xdir: Vec4, gdir: Vec4) -> Self {
        // J preserves the fiber, so -J u1 lies in it already; the projection
        // only removes rounding.
        let mut u2 = -apply_j(&u1);
        u2 -= xdir * xdir.dot(&u2) + gdir * gdir.dot(&u2) + u1 * u1.dot(&u2);
        Self { base, u1, u2: u2.normalize(), xdir, gdir }
    }

    pub fn coords(&self, v: &Vec4) -> Vec2 {
        Vec2::new(self.u1.dot(v), self.u2.dot(v))
    }

    pub fn lift(&self, c: &Vec2) -> Vec4 {
        self.u1 * c[0] + self.u2 * c[1]
    }

    pub fn area(&self) -> f64 {
        omega(&self.u1, &self.u2)
    }

    /// Largest difference of the frame vectors and base point.
    pub fn distance(&self, other: &Self) -> f64 {
        (self.base - other.base)
            .amax()
            .max((self.u1 - other.u1).amax())
            .max((self.u2 - other.u2).amax())
    }
}

fn directions(sys: &HamiltonianSystem, y: &Vec4) -> Result<(Vec4, Vec4)> {
    let g = sys.gradient(y)?;
    let gn = g.norm();
    if gn < sys.crit_threshold {
        return Err(Error::Regularity { grad_norm: gn });
    }
    let x = apply_j(&g);
    let gdir = g / gn;
    let mut xdir = x / x.norm();
    xdir -= gdir * gdir.dot(&xdir);
    Ok((xdir.normalize(), gdir))
}

pub fn transversal_frame(sys: &HamiltonianSystem, y: &Vec4) -> Result<TransversalFrame> {
    TransversalFrame::at(sys, y)
}
