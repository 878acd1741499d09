//! Transport of the model perturbation to a regular point through a flowbox
//! chart, and measurement of the realized transversal rotation.

use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::chart::{build_chart_with_time, ChartCertificate, FlowboxChart};
use crate::error::{Error, Result};
use crate::flow::{integrate, integrate_tangent, IntegratorConfig};
use crate::perturb::{build_bumps, build_perturbed_hamiltonian, certificate_report, disk_points, BumpProfile, BumpRotation, PerturbationCertificate, Universal, C_U_MAX};
use crate::poincare::transversal_cocycle;
use crate::symplectic::{rotation, Mat2, Mat4, Vec4};
use crate::system::{Hamiltonian, HamiltonianSystem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizeParams {
    pub alpha: f64,
    pub r: f64,
    pub epsilon: f64,
    /// Allowed fraction of bad points in the disk.
    pub kappa: f64,
    /// Target rotation error on the inner disk.
    pub gamma: f64,
    /// Points sampled in the disk for the kappa bookkeeping.
    pub samples: usize,
    pub seed: u64,
    pub universal: Universal,
    pub shrink_max: usize,
}

impl Default for RealizeParams {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            r: 0.05,
            epsilon: 0.1,
            kappa: 0.1,
            gamma: 1e-3,
            samples: 200,
            seed: 7,
            universal: Universal::default(),
            shrink_max: 4,
        }
    }
}

/// Inner-radius factor for a bad-set budget `kappa`: `[1 + (1 - kappa)^(1/3)] / 2`.
pub fn nu_for_kappa(kappa: f64) -> f64 {
    0.5 * (1.0 + (1.0 - kappa).cbrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationCertificate {
    /// Certificate of the model perturbation in chart coordinates.
    pub model: PerturbationCertificate,
    /// Chain-rule bounds on `|H~ - H|` in `C^0, C^1, C^2`.
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// `max_i sum_k |Dg_ki|` over sampled tube points.
    pub chart_c1: f64,
    /// `max_ij sum_k |D^2 g_k,ij|` over sampled tube points.
    pub chart_c2: f64,
    pub c2_within_budget: bool,
    /// Max over the inner disk of `|Phi^1_{H~}(y) - Phi^1_H(x) R_alpha|`.
    pub rotation_error: f64,
    /// Max distance between integrated `H~` orbits and conjugated model orbits.
    pub conjugation_error: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub kappa_fraction: f64,
    pub r_requested: f64,
    pub r: f64,
    pub nu: f64,
    pub alpha: f64,
    pub chart: ChartCertificate,
}

impl RealizationCertificate {
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        for (k, v) in [
            ("c0", self.c0),
            ("c1", self.c1),
            ("c2", self.c2),
            ("chart_c1", self.chart_c1),
            ("chart_c2", self.chart_c2),
            ("rotation_error", self.rotation_error),
            ("conjugation_error", self.conjugation_error),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("kappa_fraction", self.kappa_fraction),
            ("r_requested", self.r_requested),
            ("r", self.r),
            ("nu", self.nu),
            ("alpha", self.alpha),
            ("chart_sympl_residual", self.chart.sympl_residual),
            ("chart_field_residual", self.chart.field_residual),
        ] {
            s.push_str(&format!("{k}={v}\n"));
        }
        s.push_str(&format!("c2_within_budget={}\n", self.c2_within_budget));
        for line in self.model.to_key_values().lines() {
            s.push_str(&format!("model.{line}\n"));
        }
        s
    }
}

/// `H~ = H - alpha B(g^(m))` with `g^ = g - g(x)`; equals `H` away from the
/// chart image of the tube.
pub struct Realized {
    base: HamiltonianSystem,
    chart: FlowboxChart,
    model: BumpRotation,
    offset: Vec4,
    orbit: Vec<Vec4>,
    reach: f64,
}

impl Realized {
    pub fn chart(&self) -> &FlowboxChart {
        &self.chart
    }

    pub fn model(&self) -> &BumpRotation {
        &self.model
    }

    /// Chart coordinates relative to the base point, or `None` when `m` is far
    /// from the flowbox.
    pub fn local(&self, m: &Vec4) -> Option<Vec4> {
        if self.orbit.iter().all(|p| (p - m).norm() > self.reach) {
            return None;
        }
        self.chart.apply(m).ok().map(|z| z - self.offset)
    }

    pub fn local_inverse(&self, z: &Vec4) -> Result<Vec4> {
        self.chart.inverse(&(z + self.offset))
    }

    pub fn local_differential(&self, m: &Vec4) -> Result<Mat4> {
        self.chart.differential(m)
    }

    fn alpha(&self) -> f64 {
        self.model.profile.alpha
    }
}

impl Hamiltonian for Realized {
    fn energy(&self, y: &Vec4) -> f64 {
        let h = self.base.model().energy(y);
        match self.local(y) {
            Some(z) => h - self.alpha() * self.model.bump(&z),
            None => h,
        }
    }

    fn gradient(&self, y: &Vec4) -> Vec4 {
        let g = self.base.model().gradient(y);
        let Some(z) = self.local(y) else { return g };
        let gb = self.model.bump_gradient(&z);
        if gb == Vec4::zeros() {
            return g;
        }
        match self.chart.differential(y) {
            Ok(d) => g - d.transpose() * gb * self.alpha(),
            Err(_) => Vec4::repeat(f64::NAN),
        }
    }

    fn hessian(&self, y: &Vec4) -> Mat4 {
        let h = self.base.model().hessian(y);
        let Some(z) = self.local(y) else { return h };
        let gb = self.model.bump_gradient(&z);
        let hb = self.model.bump_hessian(&z);
        if gb == Vec4::zeros() && hb == Mat4::zeros() {
            return h;
        }
        let (Ok(d), Ok(d2)) = (self.chart.differential(y), self.chart.second_differential(y)) else {
            return Mat4::repeat(f64::NAN);
        };
        let mut corr = d.transpose() * hb * d;
        for k in 0..4 {
            corr += d2[k] * gb[k];
        }
        h - corr * self.alpha()
    }
}

pub fn realized_id(base: &str, x: &Vec4, alpha: f64, r: f64) -> String {
    format!("realized({base},{},{},{},{},{alpha},{r})", x[0], x[1], x[2], x[3])
}

fn check_flowbox(sys: &HamiltonianSystem, x: &Vec4, r: f64, cfg: &IntegratorConfig) -> Result<Vec<Vec4>> {
    let coarse = IntegratorConfig { dt: cfg.dt.max(1e-3), ..*cfg };
    let fwd = integrate(sys, x, 1.2, &coarse)?;
    let bwd = integrate(sys, x, -0.2, &coarse)?;
    let pts: Vec<(f64, Vec4)> = bwd
        .states
        .iter()
        .rev()
        .chain(fwd.states.iter().skip(1))
        .step_by(10)
        .map(|s| (s.t, s.y))
        .collect();
    // Non-periodic over [0, 1]: the orbit does not return to B(x, r).
    let ret = pts
        .iter()
        .filter(|(t, _)| *t > 0.1 && *t <= 1.0)
        .map(|(_, p)| (p - x).norm())
        .fold(f64::INFINITY, f64::min);
    if ret <= r {
        return Err(Error::FlowboxOverlap { separation: ret, radius: r });
    }
    // Not self-intersecting: orbit pieces far apart in time stay 2r apart.
    let speed = pts.iter().map(|(_, p)| sys.vector_field(p).map(|v| v.norm())).collect::<Result<Vec<_>>>()?;
    let vmax = speed.iter().cloned().fold(0.0, f64::max);
    for (i, (ti, pi)) in pts.iter().enumerate() {
        for (tj, pj) in pts.iter().skip(i + 1) {
            if (tj - ti) * vmax > 6.0 * r && (tj - ti) > 0.3 {
                let d = (pi - pj).norm();
                if d <= 2.0 * r {
                    return Err(Error::FlowboxOverlap { separation: d, radius: r });
                }
            }
        }
    }
    Ok(pts.into_iter().map(|p| p.1).collect())
}

struct Measured {
    inner: f64,
    errors: Vec<f64>,
    conjugation: f64,
}

/// Time-1 model flow and differential, integrated where the closed form does
/// not apply.
fn model_flow(model: &BumpRotation, model_sys: &HamiltonianSystem, z: &Vec4, cfg: &IntegratorConfig) -> Result<(Vec4, Mat4)> {
    match model.closed_form(z, 1.0) {
        Err(Error::Validity(_)) => {
            let st = integrate_tangent(model_sys, z, 1.0, cfg)?;
            Ok((st.y, st.f))
        }
        other => other,
    }
}

/// Transversal sections are the chart preimages of `span(e2, e4)`. At the
/// source they carry the frame of `x`; at the target, the chart image of the
/// frame of `phi^1(x)` is expressed in the chart basis through `basis_inv`.
fn chart_cocycle(dmodel: &Mat4, basis_inv: &Mat4) -> Mat2 {
    let m = basis_inv * dmodel;
    Mat2::new(m[(0, 1)], m[(0, 3)], m[(1, 1)], m[(1, 3)])
}

fn measure(
    realized: &Realized,
    tilde: &HamiltonianSystem,
    base: &HamiltonianSystem,
    x: &Vec4,
    params: &RealizeParams,
    cfg: &IntegratorConfig,
) -> Result<Measured> {
    let profile = realized.model.profile;
    let model_sys = build_perturbed_hamiltonian(&profile);
    let unperturbed = transversal_cocycle(base, x, 1.0, cfg)?;
    let target = unperturbed.phi * rotation(profile.alpha);
    let dst = unperturbed.dst;
    let dg = realized.local_differential(&dst.base)?;
    let basis = Mat4::from_columns(&[dg * dst.u1, dg * dst.u2, Vec4::x(), Vec4::z()]);
    let basis_inv = basis.try_inverse().ok_or_else(|| Error::Chart("degenerate target section".into()))?;
    let err = |z: &Vec4| -> Result<f64> {
        let (_, d) = model_flow(&realized.model, &model_sys, z, cfg)?;
        Ok((chart_cocycle(&d, &basis_inv) - target).amax())
    };
    let disk = disk_points(&profile);
    let inner = disk.par_iter().map(err).collect::<Result<Vec<f64>>>()?.into_iter().fold(0.0, f64::max);
    // Direct integration of H~ against the conjugated model flow.
    let conjugation = [disk[0], disk[disk.len() / 2], disk[disk.len() - 1]]
        .par_iter()
        .map(|z| -> Result<f64> {
            let y = realized.local_inverse(z)?;
            let y1 = integrate(tilde, &y, 1.0, cfg)?.last().y;
            let (z1, _) = model_flow(&realized.model, &model_sys, z, cfg)?;
            Ok((realized.local_inverse(&z1)? - y1).amax())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    // Uniform points of the cylinder {rho < r, |w| < r} of the transversal section.
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let r = profile.r;
    let mut pts = Vec::with_capacity(params.samples);
    while pts.len() < params.samples {
        let (a, b) = (rng.random_range(-r..r), rng.random_range(-r..r));
        if a.hypot(b) < r {
            pts.push(Vec4::new(0.0, a, rng.random_range(-r..r), b));
        }
    }
    let errors = pts.par_iter().map(err).collect::<Result<Vec<f64>>>()?;
    Ok(Measured { inner, errors, conjugation })
}

fn chain_rule_bounds(realized: &Realized, profile: &BumpProfile, n: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7ab1e);
    let r = profile.r;
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let z = Vec4::new(
            rng.random_range(0.0..profile.rho_bar),
            rng.random_range(-r..r),
            rng.random_range(-r..r),
            rng.random_range(-r..r),
        );
        if z[1].hypot(z[3]) < r {
            pts.push(z);
        }
    }
    let vals = pts
        .par_iter()
        .map(|z| -> Result<(f64, f64)> {
            let y = realized.local_inverse(z)?;
            let d = realized.local_differential(&y)?;
            let d2 = realized.chart.second_differential(&y)?;
            let a = (0..4).map(|i| d.column(i).abs().sum()).fold(0.0, f64::max);
            let mut b = 0.0f64;
            for i in 0..4 {
                for j in 0..4 {
                    b = b.max((0..4).map(|k| d2[k][(i, j)].abs()).sum());
                }
            }
            Ok((a, b))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vals.iter().fold((0.0f64, 0.0f64), |m, v| (m.0.max(v.0), m.1.max(v.1))))
}

/// Realizes the rotation by `alpha` of the time-1 transversal cocycle at `x`.
/// The radius is halved until the inner-disk error is below `gamma`.
pub fn realize_rotation(
    sys: &HamiltonianSystem,
    x: &Vec4,
    params: &RealizeParams,
    cfg: &IntegratorConfig,
) -> Result<(HamiltonianSystem, RealizationCertificate)> {
    if !(params.kappa > 0.0 && params.kappa < 1.0) {
        return Err(Error::Parameter("kappa must lie in (0, 1)".into()));
    }
    if !(params.gamma > 0.0 && params.r > 0.0 && params.epsilon > 0.0) {
        return Err(Error::Parameter("gamma, r and epsilon must be positive".into()));
    }
    if !sys.is_regular(x) {
        return Err(Error::Regularity { grad_norm: sys.gradient(x)?.norm() });
    }
    let nu = nu_for_kappa(params.kappa);
    let mut r = params.r;
    let mut attempt = 0;
    loop {
        let orbit = check_flowbox(sys, x, r, cfg)?;
        let chart = build_chart_with_time(sys, x, r, 1.2)?;
        let profile = build_bumps(r, nu, params.universal)?.with_alpha(params.alpha)?;
        let offset = chart.apply(x)?;
        let gain = chart.differential(x)?.try_inverse().map(|m| m.norm()).unwrap_or(1.0);
        let realized = Arc::new(Realized {
            base: sys.clone(),
            chart,
            model: BumpRotation { profile },
            offset,
            orbit,
            reach: 4.0 * r * (1.0 + gain),
        });
        let tilde = HamiltonianSystem::new(realized_id(&sys.id, x, params.alpha, r), realized.clone())
            .with_domain(sys.domain)
            .with_crit_threshold(sys.crit_threshold);
        let m = measure(&realized, &tilde, sys, x, params, cfg)?;
        attempt += 1;
        if m.inner > params.gamma && attempt <= params.shrink_max {
            r *= 0.5;
            continue;
        }
        let model = certificate_report(&profile, params.epsilon, 1296, cfg)?;
        let (a, b) = chain_rule_bounds(&realized, &profile, 64, params.seed)?;
        let c0 = model.c0;
        let c1 = model.c1.max(model.c1 * a);
        let c2 = (model.c2 * a * a + model.c1 * b).max(c1);
        let bad = m.errors.iter().filter(|e| **e > params.gamma).count();
        let cert = RealizationCertificate {
            c0,
            c1,
            c2,
            chart_c1: a,
            chart_c2: b,
            c2_within_budget: c2 <= C_U_MAX * params.epsilon,
            rotation_error: m.inner,
            conjugation_error: m.conjugation,
            gamma: params.gamma,
            kappa: params.kappa,
            kappa_fraction: bad as f64 / m.errors.len() as f64,
            r_requested: params.r,
            r,
            nu,
            alpha: params.alpha,
            chart: realized.chart.residuals,
            model,
        };
        return Ok((tilde, cert));
    }
}
