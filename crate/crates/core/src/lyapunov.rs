//! Finite-time Lyapunov exponents of the transversal cocycle.

use std::io::Write;

use nalgebra::{Matrix4x2, SVD};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{integrate_tangent, IntegratorConfig};
use crate::frame::TransversalFrame;
use crate::poincare::{block_schedule, cocycle_blocks, transversal_cocycle};
use crate::sampling::{sample_region, SurfaceRegion};
use crate::symplectic::{Mat2, Vec2, Vec4};
use crate::system::HamiltonianSystem;

pub const SPLITTING_THRESHOLD: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentEstimate {
    pub lambda_plus: f64,
    pub t: f64,
    pub renorm_count: usize,
    pub base: Vec4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplittingEstimate {
    pub n_plus: Vec2,
    pub n_minus: Vec2,
    pub angle: f64,
    pub forward_t: f64,
    pub backward_t: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedLE {
    pub value: f64,
    pub t: f64,
    pub n_samples: usize,
    pub std_error: f64,
    pub region: SurfaceRegion,
    pub escaped: usize,
}

pub fn op_norm(m: &Mat2) -> f64 {
    SVD::new(*m, false, false).singular_values[0]
}

/// Right singular vector of the smallest singular value.
pub fn most_contracted(m: &Mat2) -> Vec2 {
    let svd = SVD::new(*m, false, true);
    let vt = svd.v_t.expect("requested");
    let k = if svd.singular_values[0] >= svd.singular_values[1] { 1 } else { 0 };
    canonical_sign(Vec2::new(vt[(k, 0)], vt[(k, 1)]))
}

pub fn canonical_sign(v: Vec2) -> Vec2 {
    let v = v.normalize();
    if v[0] < -1e-12 || (v[0].abs() <= 1e-12 && v[1] < 0.0) {
        -v
    } else {
        v
    }
}

pub fn angle_between(a: &Vec2, b: &Vec2) -> f64 {
    (a.dot(b).abs() / (a.norm() * b.norm())).min(1.0).acos()
}

/// Running QR product `B_n ... B_1` keeping `log |.|` without overflow.
#[derive(Debug, Clone)]
pub struct RenormalizedProduct {
    q: Mat2,
    r: Mat2,
    log_scale: f64,
    pub count: usize,
}

impl Default for RenormalizedProduct {
    fn default() -> Self {
        Self { q: Mat2::identity(), r: Mat2::identity(), log_scale: 0.0, count: 0 }
    }
}

impl RenormalizedProduct {
    pub fn push(&mut self, block: &Mat2) {
        let qr = (block * self.q).qr();
        self.q = qr.q();
        self.r = qr.r() * self.r;
        let s = self.r.norm();
        self.log_scale += s.ln();
        self.r /= s;
        self.count += 1;
    }

    pub fn log_norm(&self) -> f64 {
        self.log_scale + op_norm(&self.r).ln()
    }

    /// The product divided by `exp(log_scale)`.
    pub fn normalized(&self) -> Mat2 {
        self.q * self.r
    }
}

pub fn upper_exponent(sys: &HamiltonianSystem, y0: &Vec4, t_total: f64, cfg: &IntegratorConfig) -> Result<ExponentEstimate> {
    if !(t_total > 0.0) {
        return Err(Error::Parameter("exponent window must be positive".into()));
    }
    let (n, len) = block_schedule(t_total);
    let mut prod = RenormalizedProduct::default();
    for b in cocycle_blocks(sys, y0, n, len, cfg)? {
        prod.push(&b.phi);
    }
    Ok(ExponentEstimate { lambda_plus: prod.log_norm() / t_total, t: t_total, renorm_count: prod.count, base: *y0 })
}

/// `(lambda(T), lambda(2T))`; reported side by side, no extrapolation.
pub fn two_window(sys: &HamiltonianSystem, y0: &Vec4, t_total: f64, cfg: &IntegratorConfig) -> Result<(f64, f64)> {
    Ok((upper_exponent(sys, y0, t_total, cfg)?.lambda_plus, upper_exponent(sys, y0, 2.0 * t_total, cfg)?.lambda_plus))
}

fn window_product(sys: &HamiltonianSystem, y0: &Vec4, t: f64, cfg: &IntegratorConfig) -> Result<RenormalizedProduct> {
    let (n, len) = block_schedule(t);
    let mut prod = RenormalizedProduct::default();
    for b in cocycle_blocks(sys, y0, n, len, cfg)? {
        prod.push(&b.phi);
    }
    Ok(prod)
}

pub fn oseledets_splitting(sys: &HamiltonianSystem, y0: &Vec4, t_total: f64, cfg: &IntegratorConfig) -> Result<SplittingEstimate> {
    oseledets_splitting_with(sys, y0, t_total, SPLITTING_THRESHOLD, cfg)
}

/// `n_minus` is the direction contracted most by the forward window,
/// `n_plus` the one contracted most by the backward window; both at `y0`.
pub fn oseledets_splitting_with(
    sys: &HamiltonianSystem,
    y0: &Vec4,
    t_total: f64,
    threshold: f64,
    cfg: &IntegratorConfig,
) -> Result<SplittingEstimate> {
    if !(t_total > 0.0) {
        return Err(Error::Parameter("splitting window must be positive".into()));
    }
    let fwd = window_product(sys, y0, t_total, cfg)?;
    let exponent = fwd.log_norm() / t_total;
    if exponent <= threshold {
        return Err(Error::TrivialSplitting { exponent, threshold });
    }
    let bwd = window_product(sys, y0, -t_total, cfg)?;
    let n_minus = most_contracted(&fwd.normalized());
    let n_plus = most_contracted(&bwd.normalized());
    Ok(SplittingEstimate {
        n_plus,
        n_minus,
        angle: angle_between(&n_plus, &n_minus),
        forward_t: t_total,
        backward_t: t_total,
        exponent,
    })
}

/// `(lambda from Dphi^T on the fiber vectors, lambda from Phi^T)`.
pub fn exponent_equality_check(sys: &HamiltonianSystem, y0: &Vec4, t_total: f64, cfg: &IntegratorConfig) -> Result<(f64, f64)> {
    if !(t_total > 0.0) {
        return Err(Error::Parameter("exponent window must be positive".into()));
    }
    let frame = TransversalFrame::at(sys, y0)?;
    let (n, len) = block_schedule(t_total);
    let mut q = Matrix4x2::from_columns(&[frame.u1, frame.u2]);
    let mut r = Mat2::identity();
    let mut log_scale = 0.0;
    let mut y = *y0;
    for _ in 0..n {
        let st = integrate_tangent(sys, &y, len, cfg)?;
        let qr = (st.f * q).qr();
        q = qr.q();
        r = qr.r() * r;
        let s = r.norm();
        log_scale += s.ln();
        r /= s;
        y = st.y;
    }
    let tangent = (log_scale + op_norm(&r).ln()) / t_total;
    let transversal = upper_exponent(sys, y0, t_total, cfg)?.lambda_plus;
    Ok((tangent, transversal))
}

/// `ln sin` of the angle between the transported directions, per unit time.
pub fn angle_decay(
    sys: &HamiltonianSystem,
    y0: &Vec4,
    split: &SplittingEstimate,
    t_total: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, f64)>> {
    let (n, len) = block_schedule(t_total);
    let (mut a, mut b) = (split.n_plus, split.n_minus);
    let mut out = vec![(0.0, split.angle.sin().ln())];
    for (k, blk) in cocycle_blocks(sys, y0, n, len, cfg)?.iter().enumerate() {
        a = (blk.phi * a).normalize();
        b = (blk.phi * b).normalize();
        out.push(((k + 1) as f64 * len, angle_between(&a, &b).sin().ln()));
    }
    Ok(out)
}

/// Direct product `Phi^T(y0)` (no renormalization), for short windows.
pub fn cocycle_matrix(sys: &HamiltonianSystem, y0: &Vec4, t_total: f64, cfg: &IntegratorConfig) -> Result<Mat2> {
    Ok(transversal_cocycle(sys, y0, t_total, cfg)?.phi)
}

pub struct ExponentRow {
    pub index: usize,
    pub base: Vec4,
    pub estimate: Option<ExponentEstimate>,
}

/// Per-point exponents over a sample, in sample order; escaped orbits give `None`.
pub fn exponent_scan(
    sys: &HamiltonianSystem,
    points: &[Vec4],
    t_total: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<ExponentRow>> {
    points
        .par_iter()
        .enumerate()
        .map(|(index, p)| match upper_exponent(sys, p, t_total, cfg) {
            Ok(e) => Ok(ExponentRow { index, base: *p, estimate: Some(e) }),
            Err(Error::Escape { .. }) => Ok(ExponentRow { index, base: *p, estimate: None }),
            Err(e) => Err(e),
        })
        .collect()
}

pub fn integrated_le(
    sys: &HamiltonianSystem,
    region: &SurfaceRegion,
    t_total: f64,
    n: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<IntegratedLE> {
    if n < 2 {
        return Err(Error::Parameter("integrated exponent needs at least two samples".into()));
    }
    let sample = sample_region(sys, region, n, seed)?;
    let rows = exponent_scan(sys, &sample.points, t_total, cfg)?;
    let kept: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.estimate.map(|e| (sample.weights[r.index], e.lambda_plus)))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptySample);
    }
    let wsum: f64 = kept.iter().map(|k| k.0).sum();
    let value = kept.iter().map(|(w, v)| w * v).sum::<f64>() / wsum;
    let var = kept.iter().map(|(w, v)| (w / wsum).powi(2) * (v - value).powi(2)).sum::<f64>();
    Ok(IntegratedLE {
        value: value.max(0.0),
        t: t_total,
        n_samples: kept.len(),
        std_error: var.sqrt(),
        region: *region,
        escaped: rows.len() - kept.len(),
    })
}

pub fn write_exponent_csv<W: Write + ?Sized>(out: &mut W, seed: u64, t_total: f64, rows: &[ExponentRow]) -> Result<()> {
    writeln!(out, "seed,x1,x2,x3,x4,T,lambda_plus,renorm_count,escaped")?;
    for r in rows {
        let b = r.base;
        match r.estimate {
            Some(e) => writeln!(out, "{seed},{:e},{:e},{:e},{:e},{t_total},{:e},{},0", b[0], b[1], b[2], b[3], e.lambda_plus, e.renorm_count)?,
            None => writeln!(out, "{seed},{:e},{:e},{:e},{:e},{t_total},,,1", b[0], b[1], b[2], b[3])?,
        }
    }
    Ok(())
}
