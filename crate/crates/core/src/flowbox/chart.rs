//! Symplectic flowbox chart `g` with `H = H0 o g`, `H0(y) = y3`.
//!
//! Transversal `G(y) = -<X_c, y - c> / |X_c|^2`, whose Hamiltonian field is the
//! constant `grad H(c) / |grad H(c)|^2`, so the auxiliary flow moving between
//! energy levels inside `Sigma = {G = 0}` is a straight line. Surface
//! coordinates are `(<u1, q - c>, <u2, q - c>)`, which are Darboux on `Sigma_e`.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{step, IntegratorConfig, Method};
use crate::frame::TransversalFrame;
use crate::symplectic::{apply_j, j4, Mat4, Vec4};
use crate::system::HamiltonianSystem;

pub const MIN_CHART_SAMPLES: usize = 1000;
pub const FD_STEP: f64 = 1e-5;
const TAU_TOL: f64 = 1e-10;
const NEWTON_MAX: usize = 40;
const SHRINK_MAX: usize = 6;
/// Fixed Gauss steps per unit time when no closed-form flow exists.
const STEPS_PER_UNIT: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChartCertificate {
    pub sympl_residual: f64,
    pub conj_residual: f64,
    pub field_residual: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone)]
pub struct FlowboxChart {
    pub center: Vec4,
    pub radius: f64,
    pub energy: f64,
    pub frame: TransversalFrame,
    /// `X_H(center)`.
    pub xc: Vec4,
    /// Direction of the auxiliary flow, `grad H(c) / |grad H(c)|^2`.
    pub ydir: Vec4,
    pub residuals: ChartCertificate,
    /// Longest flow time the fixed-step fallback is sized for.
    pub max_time: f64,
    sys: HamiltonianSystem,
}

impl FlowboxChart {
    pub fn system(&self) -> &HamiltonianSystem {
        &self.sys
    }

    pub fn transversal(&self, y: &Vec4) -> f64 {
        -self.xc.dot(&(y - self.center)) / self.xc.norm_squared()
    }

    fn grad_g(&self) -> Vec4 {
        -self.xc / self.xc.norm_squared()
    }

    /// Time-`t` map, exact when available and otherwise a fixed number of
    /// Gauss steps so the result is smooth in `(y, t)`.
    pub fn flow(&self, y: &Vec4, t: f64) -> Result<Vec4> {
        if t == 0.0 {
            return Ok(*y);
        }
        if self.sys.has_exact_flow() {
            match self.sys.exact_flow(y, t) {
                Ok((z, _)) => return Ok(z),
                Err(Error::Validity(_)) => {}
                Err(e) => return Err(e),
            }
        }
        let n = (self.max_time * STEPS_PER_UNIT).ceil().max(1.0) as usize;
        let h = t / n as f64;
        let cfg = IntegratorConfig { method: Method::Gauss2, newton_tol: 1e-15, ..IntegratorConfig::default() };
        let mut z = *y;
        for _ in 0..n {
            z = step(&self.sys, &z, h, 0.0, &cfg)?.0;
        }
        Ok(z)
    }

    /// Hitting time of `Sigma`: `G(phi^tau(m)) = 0`.
    pub fn hitting_time(&self, m: &Vec4) -> Result<f64> {
        let dg = self.grad_g();
        let mut tau = 0.0;
        let mut p = *m;
        for _ in 0..NEWTON_MAX {
            let slope = dg.dot(&self.sys.vector_field(&p)?);
            if slope.abs() < 1e-12 {
                break;
            }
            let d = self.transversal(&p) / slope;
            tau -= d;
            p = self.flow(m, tau)?;
            if d.abs() <= 4.0 * f64::EPSILON * (1.0 + tau.abs()) {
                break;
            }
        }
        let res = self.transversal(&p).abs();
        if !(res <= TAU_TOL) {
            return Err(Error::Chart(format!("hitting time did not converge (|G| = {res:e})")));
        }
        Ok(tau)
    }

    /// Moves `p` along the auxiliary direction to the level `H = e`.
    fn to_level(&self, p: &Vec4, e: f64) -> Result<Vec4> {
        let mut q = *p;
        for _ in 0..NEWTON_MAX {
            let r = self.sys.energy(&q)? - e;
            let slope = self.sys.gradient(&q)?.dot(&self.ydir);
            if slope.abs() < 1e-12 {
                break;
            }
            let d = r / slope;
            q -= self.ydir * d;
            if d.abs() <= 4.0 * f64::EPSILON * (1.0 + (q - self.center).amax()) {
                break;
            }
        }
        let res = (self.sys.energy(&q)? - e).abs();
        if !(res <= 1e-12 * (1.0 + e.abs())) {
            return Err(Error::Chart(format!("level projection did not converge (residual {res:e})")));
        }
        Ok(q)
    }

    /// `g(m) = (-tau(m), h1(q), H(m), h2(q))` with `q` the point of
    /// `Sigma_e` reached from `phi^tau(m)` along the auxiliary flow.
    pub fn apply(&self, m: &Vec4) -> Result<Vec4> {
        let tau = self.hitting_time(m)?;
        let p = self.flow(m, tau)?;
        let q = self.to_level(&p, self.energy)?;
        let d = q - self.center;
        Ok(Vec4::new(-tau, self.frame.u1.dot(&d), self.sys.energy(m)?, self.frame.u2.dot(&d)))
    }

    pub fn inverse(&self, z: &Vec4) -> Result<Vec4> {
        let q0 = self.center + self.frame.u1 * z[1] + self.frame.u2 * z[3];
        let q = self.to_level(&q0, self.energy)?;
        let p = self.to_level(&q, z[2])?;
        self.flow(&p, z[0])
    }

    /// Central-difference differential of `g`.
    pub fn differential(&self, m: &Vec4) -> Result<Mat4> {
        let mut d = Mat4::zeros();
        for k in 0..4 {
            let e = Vec4::ith(k, FD_STEP);
            let col = (self.apply(&(m + e))? - self.apply(&(m - e))?) / (2.0 * FD_STEP);
            d.set_column(k, &col);
        }
        Ok(d)
    }

    /// Second differences of `g`: entry `[k][(i, j)]` is `d_i d_j g_k`.
    pub fn second_differential(&self, m: &Vec4) -> Result<[Mat4; 4]> {
        let h = 1e-4;
        let mut out = [Mat4::zeros(); 4];
        let g0 = self.apply(m)?;
        for i in 0..4 {
            for j in i..4 {
                let v = if i == j {
                    let e = Vec4::ith(i, h);
                    (self.apply(&(m + e))? - g0 * 2.0 + self.apply(&(m - e))?) / (h * h)
                } else {
                    let (ei, ej) = (Vec4::ith(i, h), Vec4::ith(j, h));
                    (self.apply(&(m + ei + ej))? - self.apply(&(m + ei - ej))? - self.apply(&(m - ei + ej))?
                        + self.apply(&(m - ei - ej))?)
                        / (4.0 * h * h)
                };
                for k in 0..4 {
                    out[k][(i, j)] = v[k];
                    out[k][(j, i)] = v[k];
                }
            }
        }
        Ok(out)
    }

    /// `(sympl, conj, field)` residuals at one point.
    pub fn residuals_at(&self, m: &Vec4) -> Result<[f64; 3]> {
        let dg = self.differential(m)?;
        let j = j4();
        let sympl = (dg.transpose() * j * dg - j).amax();
        let conj = (self.apply(m)?[2] - self.sys.energy(m)?).abs();
        let field = (dg * self.sys.vector_field(m)? - Vec4::new(1.0, 0.0, 0.0, 0.0)).amax();
        Ok([sympl, conj, field])
    }
}

/// Uniform point of the ball `B(center, radius)`.
pub fn ball_point(rng: &mut ChaCha8Rng, center: &Vec4, radius: f64) -> Vec4 {
    loop {
        let v = Vec4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        if v.norm_squared() <= 1.0 {
            return center + v * radius;
        }
    }
}

pub fn chart_differential_checks(chart: &FlowboxChart, n: usize, seed: u64) -> ChartCertificate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec4> = (0..n).map(|_| ball_point(&mut rng, &chart.center, chart.radius)).collect();
    let res: Vec<[f64; 3]> = pts
        .par_iter()
        .map(|m| chart.residuals_at(m).unwrap_or([f64::INFINITY; 3]))
        .collect();
    let fold = |k: usize| res.iter().map(|r| r[k]).fold(0.0, f64::max);
    ChartCertificate { sympl_residual: fold(0), conj_residual: fold(1), field_residual: fold(2), n_samples: n }
}

fn make_chart(sys: &HamiltonianSystem, center: &Vec4, radius: f64, max_time: f64) -> Result<FlowboxChart> {
    let g = sys.gradient(center)?;
    let xc = apply_j(&g);
    if xc.norm() < sys.crit_threshold {
        return Err(Error::Transversality(xc.norm()));
    }
    Ok(FlowboxChart {
        center: *center,
        radius,
        energy: sys.energy(center)?,
        frame: TransversalFrame::at(sys, center)?,
        xc,
        ydir: g / g.norm_squared(),
        residuals: ChartCertificate::default(),
        max_time,
        sys: sys.clone(),
    })
}

/// Chart on `B(center, radius)`, halving the radius while `g` fails to evaluate.
pub fn build_chart(sys: &HamiltonianSystem, center: &Vec4, radius: f64, _cfg: &IntegratorConfig) -> Result<FlowboxChart> {
    build_chart_with_time(sys, center, radius, 1.0)
}

/// As `build_chart`, sizing the fallback integrator for flow times up to `max_time`.
pub fn build_chart_with_time(sys: &HamiltonianSystem, center: &Vec4, radius: f64, max_time: f64) -> Result<FlowboxChart> {
    if !(radius > 0.0) {
        return Err(Error::Parameter("chart radius must be positive".into()));
    }
    let mut r = radius;
    for _ in 0..=SHRINK_MAX {
        let mut chart = make_chart(sys, center, r, max_time)?;
        let cert = chart_differential_checks(&chart, MIN_CHART_SAMPLES, 0);
        if cert.sympl_residual.is_finite() && cert.field_residual.is_finite() {
            chart.residuals = cert;
            return Ok(chart);
        }
        r *= 0.5;
    }
    Err(Error::Chart(format!("Newton failed on the ball even after shrinking the radius to {r:e}")))
}
