//! m-dominated splittings of the transversal cocycle along orbits.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::IntegratorConfig;
use crate::lyapunov::{angle_between, oseledets_splitting, SplittingEstimate};
use crate::poincare::{cocycle_blocks, transversal_cocycle, TransversalCocycle};
use crate::sampling::{sample_region, SurfaceRegion};
use crate::symplectic::{Mat2, Vec2, Vec4};
use crate::system::HamiltonianSystem;

pub const DOMINATION_BOUND: f64 = 0.5;
/// Window used to estimate the splitting for the conservation identity.
pub const CONSERVATION_WINDOW: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Dominated(u32),
    NotDominated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Directions {
    /// Finite-window Oseledets estimate at every sample time (window `4m`).
    Estimated,
    /// Given at the base point in its frame and transported along the orbit.
    Supplied { n_plus: Vec2, n_minus: Vec2 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominationReport {
    pub m: u32,
    pub ratios: Vec<f64>,
    /// `max(ratios)`, or infinity when there is no splitting.
    pub worst: f64,
    pub classification: Classification,
    pub trivial: bool,
    pub base: Vec4,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperbolicityCertificate {
    pub c: f64,
    pub theta: f64,
    /// Smallest dominating `m`, 0 when none was found.
    pub contraction_m: u32,
    pub satisfied: bool,
    pub n_points: usize,
}

fn stretch(m: &Mat2, v: &Vec2) -> f64 {
    (m * v).norm() / v.norm()
}

fn product(blocks: &[TransversalCocycle]) -> Mat2 {
    blocks.iter().fold(Mat2::identity(), |acc, b| b.phi * acc)
}

pub fn domination_scan(sys: &HamiltonianSystem, y0: &Vec4, m: u32, t_total: f64, cfg: &IntegratorConfig) -> Result<DominationReport> {
    domination_scan_with(sys, y0, m, t_total, Directions::Estimated, cfg)
}

pub fn domination_scan_with(
    sys: &HamiltonianSystem,
    y0: &Vec4,
    m: u32,
    t_total: f64,
    dirs: Directions,
    cfg: &IntegratorConfig,
) -> Result<DominationReport> {
    if m == 0 {
        return Err(Error::Parameter("domination window m must be at least 1".into()));
    }
    let n = (t_total + 1e-9).floor();
    if n < m as f64 {
        return Err(Error::Parameter("scan length must be at least m".into()));
    }
    let n = n as usize;
    let m_us = m as usize;
    let blocks = cocycle_blocks(sys, y0, n, 1.0, cfg)?;
    let mut ratios = Vec::with_capacity(n - m_us + 1);
    let (mut np, mut nm) = match dirs {
        Directions::Supplied { n_plus, n_minus } => (n_plus, n_minus),
        Directions::Estimated => (Vec2::zeros(), Vec2::zeros()),
    };
    for k in 0..=(n - m_us) {
        if let Directions::Estimated = dirs {
            let x = if k < n { blocks[k].src.base } else { blocks[n - 1].dst.base };
            match oseledets_splitting(sys, &x, 4.0 * m as f64, cfg) {
                Ok(s) => {
                    np = s.n_plus;
                    nm = s.n_minus;
                }
                Err(Error::TrivialSplitting { .. }) => {
                    return Ok(DominationReport {
                        m,
                        ratios: Vec::new(),
                        worst: f64::INFINITY,
                        classification: Classification::NotDominated,
                        trivial: true,
                        base: *y0,
                        t: t_total,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        let p = product(&blocks[k..k + m_us]);
        ratios.push(stretch(&p, &nm) / stretch(&p, &np));
        if let Directions::Supplied { .. } = dirs {
            if k < n {
                np = (blocks[k].phi * np).normalize();
                nm = (blocks[k].phi * nm).normalize();
            }
        }
    }
    let worst = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let classification = if worst <= DOMINATION_BOUND { Classification::Dominated(m) } else { Classification::NotDominated };
    Ok(DominationReport { m, ratios, worst, classification, trivial: false, base: *y0, t: t_total })
}

/// Relative residual of `sin g0 = sin g_t s+ s-`, the area identity of the
/// transversal cocycle restricted to the splitting directions.
pub fn conservation_identity_residual(sys: &HamiltonianSystem, y0: &Vec4, t: f64, cfg: &IntegratorConfig) -> Result<f64> {
    let s: SplittingEstimate = oseledets_splitting(sys, y0, CONSERVATION_WINDOW, cfg)?;
    conservation_identity_residual_with(sys, y0, t, s.n_plus, s.n_minus, cfg)
}

pub fn conservation_identity_residual_with(
    sys: &HamiltonianSystem,
    y0: &Vec4,
    t: f64,
    n_plus: Vec2,
    n_minus: Vec2,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let phi = transversal_cocycle(sys, y0, t, cfg)?.phi;
    let (a, b) = (phi * n_plus.normalize(), phi * n_minus.normalize());
    let sin0 = angle_between(&n_plus, &n_minus).sin();
    let sint = angle_between(&a, &b).sin();
    Ok((sin0 - sint * a.norm() * b.norm()).abs() / sin0)
}

/// `dominated[m - 1]` for every `m <= m_max`, or `None` if the orbit escaped.
fn domination_profile(sys: &HamiltonianSystem, p: &Vec4, m_max: u32, cfg: &IntegratorConfig) -> Result<Option<Vec<bool>>> {
    let mut out = Vec::with_capacity(m_max as usize);
    for m in 1..=m_max {
        match domination_scan(sys, p, m, m as f64, cfg) {
            Ok(r) => out.push(r.classification == Classification::Dominated(m)),
            Err(Error::Escape { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Some(out))
}

/// `log ratio(t)` for `t = 0..=t_fit`, or `None` if the orbit escaped.
fn log_ratio_curve(sys: &HamiltonianSystem, p: &Vec4, m: u32, t_fit: usize, cfg: &IntegratorConfig) -> Result<Option<Vec<f64>>> {
    let run = || -> Result<Vec<f64>> {
        let split = oseledets_splitting(sys, p, 4.0 * m as f64, cfg)?;
        let mut acc = Mat2::identity();
        let mut out = vec![0.0];
        for b in cocycle_blocks(sys, p, t_fit, 1.0, cfg)? {
            acc = b.phi * acc;
            out.push((stretch(&acc, &split.n_minus) / stretch(&acc, &split.n_plus)).ln());
        }
        Ok(out)
    };
    match run() {
        Ok(v) => Ok(Some(v)),
        Err(Error::Escape { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Samples `n` points of the region, finds the smallest `m <= m_max` dominating
/// at all of them and fits `ratio(t) <= C theta^t` over integer `t <= T`.
pub fn anosov_diagnostic(
    sys: &HamiltonianSystem,
    region: &SurfaceRegion,
    m_max: u32,
    n: usize,
    t_fit: f64,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<HyperbolicityCertificate> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let sample = sample_region(sys, region, n, seed)?;
    let t_steps = t_fit.max(1.0).floor() as usize;
    let profiles: Vec<Vec<bool>> = sample
        .points
        .par_iter()
        .map(|p| domination_profile(sys, p, m_max, cfg))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let failed = HyperbolicityCertificate { c: 1.0, theta: 1.0, contraction_m: 0, satisfied: false, n_points: profiles.len() };
    if profiles.is_empty() {
        return Ok(failed);
    }
    let Some(m) = (1..=m_max).find(|&m| profiles.iter().all(|d| d[m as usize - 1])) else {
        return Ok(failed);
    };
    let curves: Vec<Vec<f64>> = sample
        .points
        .par_iter()
        .map(|p| log_ratio_curve(sys, p, m, t_steps, cfg))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    // Pooled least squares of log ratio = log C + t log theta.
    let pts: Vec<(f64, f64)> = curves
        .iter()
        .flat_map(|c| c.iter().enumerate().map(|(t, &l)| (t as f64, l)))
        .collect();
    if pts.is_empty() {
        return Ok(failed);
    }
    let k = pts.len() as f64;
    let (st, sl) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mt, ml) = (st / k, sl / k);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mt) * (p.1 - ml), a.1 + (p.0 - mt).powi(2)));
    if sxx == 0.0 {
        return Ok(failed);
    }
    let log_theta = sxy / sxx;
    let log_c = pts.iter().map(|p| p.1 - p.0 * log_theta).fold(f64::NEG_INFINITY, f64::max);
    let theta = log_theta.exp();
    Ok(HyperbolicityCertificate {
        c: log_c.exp(),
        theta,
        contraction_m: m,
        satisfied: theta < 1.0,
        n_points: profiles.len(),
    })
}
