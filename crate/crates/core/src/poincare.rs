//! Linear Poincaré flow `P^t` on `N_x` and its transversal part `Phi^t` on
//! `N_x ∩ ker dH`, as matrices between deterministic frames.

use std::io::Write;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::flow::{integrate_tangent, IntegratorConfig};
use crate::frame::TransversalFrame;
use crate::symplectic::{Mat2, Mat4, Vec4};
use crate::system::HamiltonianSystem;

pub const FRAME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransversalCocycle {
    pub src: TransversalFrame,
    pub dst: TransversalFrame,
    pub phi: Mat2,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalCocycle {
    pub src: TransversalFrame,
    pub dst: TransversalFrame,
    /// In the bases `(u1, u2, gdir)`.
    pub p: Matrix3<f64>,
    pub t: f64,
}

impl TransversalCocycle {
    pub fn identity(frame: TransversalFrame) -> Self {
        Self { src: frame, dst: frame, phi: Mat2::identity(), t: 0.0 }
    }

    /// `|det(Phi) w(dst) / w(src) - 1|`.
    pub fn area_residual(&self) -> f64 {
        (self.phi.determinant() * self.dst.area() / self.src.area() - 1.0).abs()
    }
}

/// `Phi[i][j] = <dst.u_i, F src.u_j>`.
pub fn transversal_matrix(src: &TransversalFrame, dst: &TransversalFrame, f: &Mat4) -> Mat2 {
    let a = f * src.u1;
    let b = f * src.u2;
    Mat2::new(dst.u1.dot(&a), dst.u1.dot(&b), dst.u2.dot(&a), dst.u2.dot(&b))
}

pub fn normal_matrix(src: &TransversalFrame, dst: &TransversalFrame, f: &Mat4) -> Matrix3<f64> {
    let sb = [src.u1, src.u2, src.gdir];
    let db = [dst.u1, dst.u2, dst.gdir];
    Matrix3::from_fn(|i, j| db[i].dot(&(f * sb[j])))
}

/// Unit-time pieces of `[0, T]`: `n = ceil(|T|)` blocks of length `T/n`.
pub fn block_schedule(t_total: f64) -> (usize, f64) {
    if t_total == 0.0 {
        return (0, 0.0);
    }
    let n = (t_total.abs() - 1e-9).ceil().max(1.0) as usize;
    (n, t_total / n as f64)
}

/// Consecutive cocycles over blocks of length `len`, each between the
/// deterministic frames at its endpoints.
pub fn cocycle_blocks(
    sys: &HamiltonianSystem,
    y0: &Vec4,
    count: usize,
    len: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<TransversalCocycle>> {
    let mut out = Vec::with_capacity(count);
    let mut src = TransversalFrame::at(sys, y0)?;
    for _ in 0..count {
        let st = integrate_tangent(sys, &src.base, len, cfg)?;
        let dst = TransversalFrame::at(sys, &st.y)?;
        out.push(TransversalCocycle { src, dst, phi: transversal_matrix(&src, &dst, &st.f), t: len });
        src = dst;
    }
    Ok(out)
}

pub fn transversal_cocycle(sys: &HamiltonianSystem, y0: &Vec4, t_total: f64, cfg: &IntegratorConfig) -> Result<TransversalCocycle> {
    let (n, len) = block_schedule(t_total);
    let mut acc = TransversalCocycle::identity(TransversalFrame::at(sys, y0)?);
    for b in cocycle_blocks(sys, y0, n, len, cfg)? {
        acc = compose(&acc, &b)?;
    }
    Ok(acc)
}

pub fn normal_cocycle(sys: &HamiltonianSystem, y0: &Vec4, t_total: f64, cfg: &IntegratorConfig) -> Result<NormalCocycle> {
    let (n, len) = block_schedule(t_total);
    let first = TransversalFrame::at(sys, y0)?;
    let mut src = first;
    let mut p = Matrix3::identity();
    for _ in 0..n {
        let st = integrate_tangent(sys, &src.base, len, cfg)?;
        let dst = TransversalFrame::at(sys, &st.y)?;
        p = normal_matrix(&src, &dst, &st.f) * p;
        src = dst;
    }
    Ok(NormalCocycle { src: first, dst: src, p, t: t_total })
}

/// `c2 after c1`; requires `c1.dst == c2.src`.
pub fn compose(c1: &TransversalCocycle, c2: &TransversalCocycle) -> Result<TransversalCocycle> {
    let d = c1.dst.distance(&c2.src);
    if d > FRAME_TOL {
        return Err(Error::FrameMismatch { distance: d });
    }
    Ok(TransversalCocycle { src: c1.src, dst: c2.dst, phi: c2.phi * c1.phi, t: c1.t + c2.t })
}

impl NormalCocycle {
    /// Size of the entries that would carry the energy direction into `N ∩ ker dH`
    /// relative to `|P|`; the fiber block is invariant when this is small.
    pub fn invariance_defect(&self) -> f64 {
        let v = Vector3::new(self.p[(2, 0)], self.p[(2, 1)], 0.0);
        v.amax() / self.p.amax().max(1.0)
    }
}

pub fn cocycle_csv_header() -> &'static str {
    "t,x1,x2,x3,x4,su1_1,su1_2,su1_3,su1_4,su2_1,su2_2,su2_3,su2_4,du1_1,du1_2,du1_3,du1_4,du2_1,du2_2,du2_3,du2_4,phi11,phi12,phi21,phi22,det_residual"
}

pub fn write_cocycle_csv<W: Write + ?Sized>(out: &mut W, blocks: &[TransversalCocycle]) -> Result<()> {
    writeln!(out, "{}", cocycle_csv_header())?;
    let mut t = 0.0;
    for c in blocks {
        t += c.t;
        let mut row: Vec<f64> = vec![t];
        row.extend(c.src.base.iter());
        for v in [c.src.u1, c.src.u2, c.dst.u1, c.dst.u2] {
            row.extend(v.iter());
        }
        row.extend([c.phi[(0, 0)], c.phi[(0, 1)], c.phi[(1, 0)], c.phi[(1, 1)], c.area_residual()]);
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}
