//! Sampling of energy surfaces with the Liouville-induced surface weights.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::symplectic::{Box4, Vec4};
use crate::system::HamiltonianSystem;

pub const PROJECTION_TOL: f64 = 1e-12;
const NEWTON_MAX: usize = 20;
const ATTEMPTS_PER_POINT: usize = 200;

#[derive(Debug, Clone)]
pub struct SurfaceSample {
    pub points: Vec<Vec4>,
    pub weights: Vec<f64>,
    pub energy: f64,
}

/// An energy level restricted to a box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceRegion {
    pub energy: f64,
    pub bounds: Box4,
}

impl SurfaceRegion {
    pub fn new(energy: f64, bounds: Box4) -> Self {
        Self { energy, bounds }
    }
}

pub fn sample_energy_surface(sys: &HamiltonianSystem, e: f64, n: usize, seed: u64) -> Result<SurfaceSample> {
    sample_region(sys, &SurfaceRegion::new(e, sys.domain), n, seed)
}

pub fn sample_region(sys: &HamiltonianSystem, region: &SurfaceRegion, n: usize, seed: u64) -> Result<SurfaceSample> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if !region.bounds.is_valid() {
        return Err(Error::Parameter("invalid sampling box".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = region.bounds;
    let mut points = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let max_attempts = ATTEMPTS_PER_POINT * n.max(10);
    let mut attempts = 0;
    while points.len() < n {
        if attempts >= max_attempts {
            return Err(Error::EmptyLevelSet { attempts });
        }
        attempts += 1;
        let y0 = Vec4::from_fn(|i, _| b.lo[i] + (b.hi[i] - b.lo[i]) * rng.random::<f64>());
        if let Some((y, gn)) = project(sys, &y0, region.energy) {
            if b.contains(&y) && sys.domain.contains(&y) && gn >= sys.crit_threshold {
                points.push(y);
                weights.push(1.0 / gn);
            }
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(SurfaceSample { points, weights, energy: region.energy })
}

/// Newton along the gradient line towards `H = e`.
fn project(sys: &HamiltonianSystem, y0: &Vec4, e: f64) -> Option<(Vec4, f64)> {
    let mut y = *y0;
    for _ in 0..NEWTON_MAX {
        let r = sys.energy(&y).ok()? - e;
        let g = sys.gradient(&y).ok()?;
        let gg = g.norm_squared();
        if r.abs() <= PROJECTION_TOL * (1.0 + e.abs()) {
            return Some((y, gg.sqrt()));
        }
        if gg < sys.crit_threshold * sys.crit_threshold {
            return None;
        }
        y -= g * (r / gg);
    }
    let r = sys.energy(&y).ok()? - e;
    if r.abs() > PROJECTION_TOL * (1.0 + e.abs()) {
        return None;
    }
    Some((y, sys.gradient(&y).ok()?.norm()))
}
