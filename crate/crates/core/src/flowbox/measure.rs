//! Evolution of the transversal measure under the nonlinear Poincare map
//! between the hyperplanes orthogonal to the flow.

use nalgebra::{Matrix3, Matrix4x3};

use crate::error::{Error, Result};
use crate::flow::{integrate, IntegratorConfig};
use crate::symplectic::Vec4;
use crate::system::HamiltonianSystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureSample {
    pub radius: f64,
    /// Volume ratio of the section map, `|det DP|`, by secants of size `radius`.
    pub volume_ratio: f64,
    /// `|X(phi^t x)| / |X(x)|`.
    pub alpha: f64,
    /// `|1 - alpha * volume_ratio|`.
    pub defect: f64,
}

/// Orthonormal basis of the hyperplane orthogonal to `v`.
pub fn hyperplane_basis(v: &Vec4) -> Matrix4x3<f64> {
    let n = v.normalize();
    let mut basis: Vec<Vec4> = Vec::with_capacity(3);
    let mut axes: Vec<usize> = (0..4).collect();
    axes.sort_by(|a, b| n[*a].abs().total_cmp(&n[*b].abs()));
    for k in axes {
        let mut w = Vec4::ith(k, 1.0);
        w -= n * n.dot(&w);
        for b in &basis {
            w -= b * b.dot(&w);
        }
        if basis.len() < 3 && w.norm() > 1e-8 {
            basis.push(w.normalize());
        }
    }
    Matrix4x3::from_columns(&basis)
}

/// Point where the orbit of `y` crosses the hyperplane through `xt`
/// orthogonal to `nt`, starting the search at time `t`.
fn section_hit(sys: &HamiltonianSystem, y: &Vec4, t: f64, xt: &Vec4, nt: &Vec4, cfg: &IntegratorConfig) -> Result<Vec4> {
    let mut p = integrate(sys, y, t, cfg)?.last().y;
    for _ in 0..50 {
        let g = nt.dot(&(p - xt));
        let dg = nt.dot(&sys.vector_field(&p)?);
        if dg.abs() < 1e-14 {
            return Err(Error::Transversality(dg));
        }
        let ds = -g / dg;
        if ds.abs() < 1e-15 {
            return Ok(p);
        }
        p = integrate(sys, &p, ds, cfg)?.last().y;
        if ds.abs() < 1e-13 * (1.0 + t.abs()) {
            return Ok(p);
        }
    }
    Err(Error::Step { time: t, iterations: 50 })
}

/// Compares the volume distortion of the section map `P^t` with `1/alpha(t)`
/// on secant cubes of each radius.
pub fn measure_evolution(
    sys: &HamiltonianSystem,
    x: &Vec4,
    t: f64,
    radii: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<MeasureSample>> {
    let x0 = sys.vector_field(x)?;
    let xt = integrate(sys, x, t, cfg)?.last().y;
    let x1 = sys.vector_field(&xt)?;
    let alpha = x1.norm() / x0.norm();
    let (e0, e1) = (hyperplane_basis(&x0), hyperplane_basis(&x1));
    radii
        .iter()
        .map(|&r| {
            let mut d = Matrix3::zeros();
            for j in 0..3 {
                let step = e0.column(j) * r;
                let plus = section_hit(sys, &(x + step), t, &xt, &x1, cfg)?;
                let minus = section_hit(sys, &(x - step), t, &xt, &x1, cfg)?;
                let col = e1.transpose() * (plus - minus) / (2.0 * r);
                d.set_column(j, &col);
            }
            let volume_ratio = d.determinant().abs();
            Ok(MeasureSample { radius: r, volume_ratio, alpha, defect: (1.0 - alpha * volume_ratio).abs() })
        })
        .collect()
}
