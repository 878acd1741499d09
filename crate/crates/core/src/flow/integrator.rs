use nalgebra::{SMatrix, SVector};

use super::{OrbitSegment, TangentState};
use crate::error::{Error, Result};
use crate::symplectic::{Mat4, Vec4};
use crate::system::HamiltonianSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ImplicitMidpoint,
    Gauss2,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit-midpoint" | "midpoint" => Ok(Self::ImplicitMidpoint),
            "gauss2" => Ok(Self::Gauss2),
            _ => Err(Error::Config(format!("unknown integrator method {s:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ImplicitMidpoint => "implicit-midpoint",
            Self::Gauss2 => "gauss2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub method: Method,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub energy_tol: f64,
    pub box_abort: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            method: Method::ImplicitMidpoint,
            newton_tol: 1e-14,
            newton_max: 50,
            energy_tol: 1e-6,
            box_abort: true,
        }
    }
}

impl IntegratorConfig {
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.dt > 0.0 && self.dt.is_finite() && self.newton_tol > 0.0 && self.energy_tol > 0.0 && self.newton_max > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter("integrator step and tolerances must be positive".into()))
        }
    }
}

/// One step of size `h` (either sign); returns the new point and the exact
/// differential of the discrete map.
pub fn step(sys: &HamiltonianSystem, y: &Vec4, h: f64, t: f64, cfg: &IntegratorConfig) -> Result<(Vec4, Mat4)> {
    match cfg.method {
        Method::ImplicitMidpoint => midpoint_step(sys, y, h, t, cfg),
        Method::Gauss2 => gauss2_step(sys, y, h, t, cfg),
    }
}

fn converged(dx: f64, x: f64, cfg: &IntegratorConfig) -> bool {
    dx <= cfg.newton_tol * (1.0 + x)
}

fn midpoint_step(sys: &HamiltonianSystem, y: &Vec4, h: f64, t: f64, cfg: &IntegratorConfig) -> Result<(Vec4, Mat4)> {
    let id = Mat4::identity();
    let mut z = y + sys.vector_field(y)? * h;
    let mut done = false;
    for _ in 0..cfg.newton_max {
        let m = (y + z) * 0.5;
        let r = z - y - sys.vector_field(&m)? * h;
        let jac = id - sys.linearized_field(&m)? * (0.5 * h);
        let dz = jac.lu().solve(&r).ok_or(Error::Step { time: t, iterations: 0 })?;
        z -= dz;
        if converged(dz.amax(), z.amax(), cfg) {
            done = true;
            break;
        }
    }
    if !done || !z.iter().all(|v| v.is_finite()) {
        return Err(Error::Step { time: t, iterations: cfg.newton_max });
    }
    let a = sys.linearized_field(&((y + z) * 0.5))? * (0.5 * h);
    let d = (id - a).lu().solve(&(id + a)).ok_or(Error::Step { time: t, iterations: cfg.newton_max })?;
    Ok((z, d))
}

const SQRT3_6: f64 = 0.288_675_134_594_812_9;

fn gauss2_step(sys: &HamiltonianSystem, y: &Vec4, h: f64, t: f64, cfg: &IntegratorConfig) -> Result<(Vec4, Mat4)> {
    let a = [[0.25, 0.25 - SQRT3_6], [0.25 + SQRT3_6, 0.25]];
    let x0 = sys.vector_field(y)?;
    let mut k = [x0, x0];
    let stage = |k: &[Vec4; 2], i: usize| y + (k[0] * a[i][0] + k[1] * a[i][1]) * h;
    let mut done = false;
    for _ in 0..cfg.newton_max {
        let ys = [stage(&k, 0), stage(&k, 1)];
        let ds = [sys.linearized_field(&ys[0])?, sys.linearized_field(&ys[1])?];
        let mut r = SVector::<f64, 8>::zeros();
        let mut jac = SMatrix::<f64, 8, 8>::identity();
        for i in 0..2 {
            let ri = k[i] - sys.vector_field(&ys[i])?;
            r.fixed_rows_mut::<4>(4 * i).copy_from(&ri);
            for j in 0..2 {
                let blk = jac.fixed_view::<4, 4>(4 * i, 4 * j) - ds[i] * (h * a[i][j]);
                jac.fixed_view_mut::<4, 4>(4 * i, 4 * j).copy_from(&blk);
            }
        }
        let dk = jac.lu().solve(&r).ok_or(Error::Step { time: t, iterations: 0 })?;
        k[0] -= dk.fixed_rows::<4>(0);
        k[1] -= dk.fixed_rows::<4>(4);
        if converged(dk.amax() * h.abs(), y.amax(), cfg) {
            done = true;
            break;
        }
    }
    let z = y + (k[0] + k[1]) * (0.5 * h);
    if !done || !z.iter().all(|v| v.is_finite()) {
        return Err(Error::Step { time: t, iterations: cfg.newton_max });
    }
    // Differentiate the stage equations: (I - h a (x) A) dK = [A1; A2] dy.
    let ys = [stage(&k, 0), stage(&k, 1)];
    let ds = [sys.linearized_field(&ys[0])?, sys.linearized_field(&ys[1])?];
    let mut jac = SMatrix::<f64, 8, 8>::identity();
    let mut rhs = SMatrix::<f64, 8, 4>::zeros();
    for i in 0..2 {
        rhs.fixed_view_mut::<4, 4>(4 * i, 0).copy_from(&ds[i]);
        for j in 0..2 {
            let blk = jac.fixed_view::<4, 4>(4 * i, 4 * j) - ds[i] * (h * a[i][j]);
            jac.fixed_view_mut::<4, 4>(4 * i, 4 * j).copy_from(&blk);
        }
    }
    let dk = jac.lu().solve(&rhs).ok_or(Error::Step { time: t, iterations: cfg.newton_max })?;
    let d = Mat4::identity() + (dk.fixed_view::<4, 4>(0, 0) + dk.fixed_view::<4, 4>(4, 0)) * (0.5 * h);
    Ok((z, d))
}

fn step_count(t_total: f64, dt: f64) -> usize {
    if t_total == 0.0 {
        0
    } else {
        ((t_total.abs() / dt) - 1e-9).ceil().max(1.0) as usize
    }
}

fn check_start(sys: &HamiltonianSystem, y0: &Vec4, t_total: f64, cfg: &IntegratorConfig) -> Result<f64> {
    cfg.validate()?;
    if !t_total.is_finite() {
        return Err(Error::Parameter("integration time must be finite".into()));
    }
    if !y0.iter().all(|v| v.is_finite()) {
        return Err(Error::Parameter("initial point must be finite".into()));
    }
    if cfg.box_abort && !sys.domain.contains(y0) {
        return Err(Error::Escape { time: 0.0 });
    }
    sys.energy(y0)
}

fn drive<F>(sys: &HamiltonianSystem, y0: &Vec4, t_total: f64, cfg: &IntegratorConfig, mut visit: F) -> Result<TangentState>
where
    F: FnMut(&TangentState),
{
    let e0 = check_start(sys, y0, t_total, cfg)?;
    let n = step_count(t_total, cfg.dt);
    let mut state = TangentState::identity(*y0);
    visit(&state);
    if n == 0 {
        return Ok(state);
    }
    let h = t_total / n as f64;
    for i in 0..n {
        let (y, d) = step(sys, &state.y, h, state.t, cfg)?;
        let t = if i + 1 == n { t_total } else { (i + 1) as f64 * h };
        if cfg.box_abort && !sys.domain.contains(&y) {
            return Err(Error::Escape { time: t });
        }
        state = TangentState { y, f: d * state.f, t };
        visit(&state);
    }
    let drift = (sys.energy(&state.y)? - e0).abs();
    if drift > cfg.energy_tol {
        return Err(Error::EnergyDrift { drift, tol: cfg.energy_tol });
    }
    Ok(state)
}

/// Orbit sampled at every step, with the fundamental matrix.
pub fn integrate(sys: &HamiltonianSystem, y0: &Vec4, t_total: f64, cfg: &IntegratorConfig) -> Result<OrbitSegment> {
    let mut seg = OrbitSegment::default();
    drive(sys, y0, t_total, cfg, |s| {
        seg.times.push(s.t);
        seg.states.push(*s);
    })?;
    Ok(seg)
}

pub fn integrate_tangent(sys: &HamiltonianSystem, y0: &Vec4, t_total: f64, cfg: &IntegratorConfig) -> Result<TangentState> {
    drive(sys, y0, t_total, cfg, |_| {})
}
