//! Hamiltonian systems as data: energy, gradient, Hessian and a working box.

use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix5;

use crate::error::{Error, Result};
use crate::symplectic::{all_finite, apply_j, j4, Box4, Mat4, Vec4};

pub const DEFAULT_CRIT_THRESHOLD: f64 = 1e-8;
pub const DEFAULT_DOMAIN_HALF_WIDTH: f64 = 1e4;

pub trait Hamiltonian: Send + Sync {
    fn energy(&self, y: &Vec4) -> f64;
    fn gradient(&self, y: &Vec4) -> Vec4;
    fn hessian(&self, y: &Vec4) -> Mat4;

    /// Exact time-`t` map and its differential, when a closed form exists.
    fn exact_flow(&self, _y: &Vec4, _t: f64) -> Result<(Vec4, Mat4)> {
        Err(Error::Unsupported("no closed-form flow for this system".into()))
    }

    fn has_exact_flow(&self) -> bool {
        false
    }
}

#[derive(Clone)]
pub struct HamiltonianSystem {
    model: Arc<dyn Hamiltonian>,
    pub id: String,
    pub domain: Box4,
    pub crit_threshold: f64,
}

impl fmt::Debug for HamiltonianSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSystem")
            .field("id", &self.id)
            .field("domain", &self.domain)
            .field("crit_threshold", &self.crit_threshold)
            .finish()
    }
}

impl HamiltonianSystem {
    pub fn new(id: impl Into<String>, model: Arc<dyn Hamiltonian>) -> Self {
        Self {
            model,
            id: id.into(),
            domain: Box4::cube(DEFAULT_DOMAIN_HALF_WIDTH),
            crit_threshold: DEFAULT_CRIT_THRESHOLD,
        }
    }

    /// System from an energy function only; derivatives by central differences.
    pub fn from_energy<F>(id: impl Into<String>, h: F) -> Self
    where
        F: Fn(&Vec4) -> f64 + Send + Sync + 'static,
    {
        Self::new(id, Arc::new(FiniteDifference(h)))
    }

    pub fn with_domain(mut self, domain: Box4) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_crit_threshold(mut self, c: f64) -> Self {
        self.crit_threshold = c;
        self
    }

    pub fn model(&self) -> &Arc<dyn Hamiltonian> {
        &self.model
    }

    pub fn energy(&self, y: &Vec4) -> Result<f64> {
        let e = self.model.energy(y);
        if e.is_finite() {
            Ok(e)
        } else {
            Err(Error::Evaluation("energy"))
        }
    }

    pub fn gradient(&self, y: &Vec4) -> Result<Vec4> {
        let g = self.model.gradient(y);
        if all_finite(&g) {
            Ok(g)
        } else {
            Err(Error::Evaluation("gradient"))
        }
    }

    pub fn hessian(&self, y: &Vec4) -> Result<Mat4> {
        let h = self.model.hessian(y);
        if h.iter().all(|x| x.is_finite()) {
            Ok(h)
        } else {
            Err(Error::Evaluation("hessian"))
        }
    }

    /// `X_H(y) = J grad H(y)`.
    pub fn vector_field(&self, y: &Vec4) -> Result<Vec4> {
        Ok(apply_j(&self.gradient(y)?))
    }

    /// `DX_H(y) = J Hess H(y)`.
    pub fn linearized_field(&self, y: &Vec4) -> Result<Mat4> {
        Ok(j4() * self.hessian(y)?)
    }

    pub fn is_regular(&self, y: &Vec4) -> bool {
        self.gradient(y)
            .map(|g| g.norm() >= self.crit_threshold)
            .unwrap_or(false)
    }

    pub fn exact_flow(&self, y: &Vec4, t: f64) -> Result<(Vec4, Mat4)> {
        self.model.exact_flow(y, t)
    }

    pub fn has_exact_flow(&self) -> bool {
        self.model.has_exact_flow()
    }

    /// Largest relative mismatch between the supplied derivatives and central
    /// differences (step `1e-5 (1 + |y|)`), as `(gradient, hessian)`.
    pub fn derivative_consistency(&self, y: &Vec4) -> Result<(f64, f64)> {
        let h = 1e-5 * (1.0 + y.norm());
        let g = self.gradient(y)?;
        let hs = self.hessian(y)?;
        let (mut eg, mut eh) = (0.0f64, 0.0f64);
        let gscale = 1.0 + g.amax();
        let hscale = 1.0 + hs.amax();
        for k in 0..4 {
            let mut yp = *y;
            let mut ym = *y;
            yp[k] += h;
            ym[k] -= h;
            let dk = (self.energy(&yp)? - self.energy(&ym)?) / (2.0 * h);
            eg = eg.max((dk - g[k]).abs() / gscale);
            let col = (self.gradient(&yp)? - self.gradient(&ym)?) / (2.0 * h);
            eh = eh.max((col - hs.column(k)).amax() / hscale);
        }
        Ok((eg, eh))
    }
}

/// Central-difference derivatives of a user-supplied energy.
pub struct FiniteDifference<F>(pub F);

impl<F> FiniteDifference<F>
where
    F: Fn(&Vec4) -> f64,
{
    fn step(y: &Vec4) -> f64 {
        1e-5 * (1.0 + y.norm())
    }
}

impl<F> Hamiltonian for FiniteDifference<F>
where
    F: Fn(&Vec4) -> f64 + Send + Sync,
{
    fn energy(&self, y: &Vec4) -> f64 {
        (self.0)(y)
    }

    fn gradient(&self, y: &Vec4) -> Vec4 {
        let h = Self::step(y);
        Vec4::from_fn(|k, _| {
            let mut yp = *y;
            let mut ym = *y;
            yp[k] += h;
            ym[k] -= h;
            ((self.0)(&yp) - (self.0)(&ym)) / (2.0 * h)
        })
    }

    // Second differences lose half the digits, so use a larger step here.
    fn hessian(&self, y: &Vec4) -> Mat4 {
        let h = 1e-4 * (1.0 + y.norm());
        let f = |di: usize, si: f64, dj: usize, sj: f64| {
            let mut z = *y;
            z[di] += si * h;
            z[dj] += sj * h;
            (self.0)(&z)
        };
        let mut m = Mat4::zeros();
        for i in 0..4 {
            for j in i..4 {
                let v = (f(i, 1.0, j, 1.0) - f(i, 1.0, j, -1.0) - f(i, -1.0, j, 1.0)
                    + f(i, -1.0, j, -1.0))
                    / (4.0 * h * h);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }
}

/// `H(y) = c^T y + y^T S y / 2` with `S` symmetric. Its flow is affine.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub s: Mat4,
    pub c: Vec4,
}

impl Quadratic {
    pub fn new(s: Mat4, c: Vec4) -> Result<Self> {
        if (s - s.transpose()).amax() > 1e-12 * (1.0 + s.amax()) {
            return Err(Error::Parameter("quadratic form must be symmetric".into()));
        }
        if !s.iter().chain(c.iter()).all(|x| x.is_finite()) {
            return Err(Error::Parameter("non-finite coefficients".into()));
        }
        Ok(Self { s, c })
    }
}

impl Hamiltonian for Quadratic {
    fn energy(&self, y: &Vec4) -> f64 {
        self.c.dot(y) + 0.5 * y.dot(&(self.s * y))
    }

    fn gradient(&self, y: &Vec4) -> Vec4 {
        self.c + self.s * y
    }

    fn hessian(&self, _y: &Vec4) -> Mat4 {
        self.s
    }

    fn exact_flow(&self, y: &Vec4, t: f64) -> Result<(Vec4, Mat4)> {
        // exp of [[tA, tb], [0, 0]] carries e^{tA} and int_0^t e^{sA} b ds.
        let a = j4() * self.s;
        let b = apply_j(&self.c);
        let mut m = Matrix5::zeros();
        m.fixed_view_mut::<4, 4>(0, 0).copy_from(&(a * t));
        m.fixed_view_mut::<4, 1>(0, 4).copy_from(&(b * t));
        let e = m.exp();
        let f: Mat4 = e.fixed_view::<4, 4>(0, 0).into();
        let shift: Vec4 = e.fixed_view::<4, 1>(0, 4).into();
        Ok((f * y + shift, f))
    }

    fn has_exact_flow(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyperbolic() -> HamiltonianSystem {
        let s = Mat4::from_diagonal(&Vec4::new(0.0, 1.0, 0.0, -1.0));
        HamiltonianSystem::new("h", Arc::new(Quadratic::new(s, Vec4::new(0.0, 0.0, 1.0, 0.0)).unwrap()))
    }

    #[test]
    fn hyperbolic_field_by_hand() {
        let y = Vec4::new(0.3, -0.2, 0.7, 0.5);
        let x = hyperbolic().vector_field(&y).unwrap();
        assert_eq!(x, Vec4::new(1.0, -y[3], 0.0, -y[1]));
    }

    #[test]
    fn finite_difference_fallback_matches_quadratic() {
        let sys = HamiltonianSystem::from_energy("fd", |y: &Vec4| y[2] + 0.5 * (y[1] * y[1] - y[3] * y[3]));
        let y = Vec4::new(0.1, 0.4, -0.3, 0.2);
        let g = sys.gradient(&y).unwrap();
        assert!((g - Vec4::new(0.0, 0.4, 1.0, -0.2)).amax() < 1e-8);
        let h = sys.hessian(&y).unwrap();
        assert!((h - Mat4::from_diagonal(&Vec4::new(0.0, 1.0, 0.0, -1.0))).amax() < 1e-5);
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let sys = HamiltonianSystem::from_energy("bad", |y: &Vec4| 1.0 / y[0]);
        assert!(matches!(sys.vector_field(&Vec4::zeros()), Err(Error::Evaluation(_))));
    }

    #[test]
    fn asymmetric_form_rejected() {
        let mut s = Mat4::zeros();
        s[(0, 1)] = 1.0;
        assert!(Quadratic::new(s, Vec4::zeros()).is_err());
    }
}
