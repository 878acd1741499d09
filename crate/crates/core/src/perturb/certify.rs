//! Certification of the local perturbation: distances, support, flatness and
//! the time-1 rotation.

use std::io::Write;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::bump::{build_bumps, BumpProfile, Tube};
use super::model::BumpRotation;
use crate::error::{Error, Result};
use crate::flow::{integrate_tangent, IntegratorConfig, Method};
use crate::symplectic::{j4, rotation, Mat2, Vec4};
use crate::system::Hamiltonian;

/// Acceptance cap on the measured universal constant.
pub const C_U_MAX: f64 = 8.0;
pub const MIN_GRID: usize = 1000;
const SUPPORT_SAMPLES: usize = 10_000;
const BOUNDARY_SAMPLES: usize = 400;
const DISK_RINGS: usize = 4;
const DISK_ANGLES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationCertificate {
    pub alpha: f64,
    pub r: f64,
    pub nu: f64,
    pub xi: f64,
    pub xi_prime: f64,
    pub rho_bar: f64,
    pub ell0: f64,
    pub epsilon: f64,
    /// Certified `C^k` norms of `H - H0` (separable bounds with margins).
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// Plain suprema over the stratified 4-d grid; never above `c0..c2`.
    pub grid_c0: f64,
    pub grid_c1: f64,
    pub grid_c2: f64,
    pub grid_points: usize,
    pub c_u: f64,
    pub support_ok: bool,
    pub support_max: f64,
    pub boundary_dx_ok: bool,
    pub boundary_dx_max: f64,
    pub rotation_error: f64,
    pub flow_state_error: f64,
    pub flow_differential_error: f64,
    pub alpha0_used: f64,
}

impl PerturbationCertificate {
    /// Bounds with their values and limits; a bound holds when `value <= limit`.
    pub fn bounds(&self) -> Vec<(&'static str, f64, f64)> {
        let w = 1.0 - self.nu;
        vec![
            ("universal constant", self.c_u, C_U_MAX),
            ("C1", self.c1, C_U_MAX * self.alpha * self.r * self.nu / w),
            ("C2", self.c2, C_U_MAX * self.alpha / (w * w)),
            ("C2 distance", self.c2, self.epsilon),
            ("support", self.support_max, 1e-15),
            ("boundary DX", self.boundary_dx_max, 1e-12),
        ]
    }

    pub fn violations(&self) -> Vec<Error> {
        self.bounds()
            .into_iter()
            .filter(|b| !(b.1 <= b.2))
            .map(|(bound, value, limit)| Error::Certificate { bound: bound.into(), value, limit })
            .collect()
    }

    pub fn to_key_values(&self) -> String {
        let rows: [(&str, String); 26] = [
            ("alpha", self.alpha.to_string()),
            ("r", self.r.to_string()),
            ("nu", self.nu.to_string()),
            ("xi", self.xi.to_string()),
            ("xi_prime", self.xi_prime.to_string()),
            ("rho_bar", self.rho_bar.to_string()),
            ("ell0", self.ell0.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("c0", self.c0.to_string()),
            ("c1", self.c1.to_string()),
            ("c2", self.c2.to_string()),
            ("grid_c0", self.grid_c0.to_string()),
            ("grid_c1", self.grid_c1.to_string()),
            ("grid_c2", self.grid_c2.to_string()),
            ("grid_points", self.grid_points.to_string()),
            ("c_u", self.c_u.to_string()),
            ("support_ok", self.support_ok.to_string()),
            ("support_max", self.support_max.to_string()),
            ("boundary_dx_ok", self.boundary_dx_ok.to_string()),
            ("boundary_dx_max", self.boundary_dx_max.to_string()),
            ("rotation_error", self.rotation_error.to_string()),
            ("flow_state_error", self.flow_state_error.to_string()),
            ("flow_differential_error", self.flow_differential_error.to_string()),
            ("alpha0_used", self.alpha0_used.to_string()),
            ("c1_limit", (C_U_MAX * self.alpha * self.r * self.nu / (1.0 - self.nu)).to_string()),
            ("c2_limit", (C_U_MAX * self.alpha / (1.0 - self.nu).powi(2)).to_string()),
        ];
        rows.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

/// Deterministic points `(0, y2, 0, y4)` on rings inside `rho < r nu`.
pub fn disk_points(profile: &BumpProfile) -> Vec<Vec4> {
    let inner = profile.inner_radius();
    let mut pts = vec![Vec4::zeros()];
    for k in 1..=DISK_RINGS {
        let rho = inner * k as f64 / (DISK_RINGS as f64 + 0.5);
        for a in 0..DISK_ANGLES {
            let th = std::f64::consts::TAU * (a as f64 + 0.25 * k as f64) / DISK_ANGLES as f64;
            pts.push(Vec4::new(0.0, rho * th.cos(), 0.0, rho * th.sin()));
        }
    }
    pts
}

/// `(y2, y4)` block of a 4x4 differential.
pub fn fiber_block(f: &crate::symplectic::Mat4) -> Mat2 {
    Mat2::new(f[(1, 1)], f[(1, 3)], f[(3, 1)], f[(3, 3)])
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64)
}

/// Per-point `(|H - H0|, max |grad|, max |Hess|)` on the stratified grid.
pub fn grid_values(profile: &BumpProfile, grid: usize) -> Vec<(Vec4, [f64; 3])> {
    let model = BumpRotation { profile: *profile };
    let k = ((grid.max(MIN_GRID) as f64).powf(0.25).ceil() as usize).max(6);
    let c = 1.2 * profile.r;
    let y1s: Vec<f64> = linspace(-0.05, profile.rho_bar + 0.05, k).collect();
    y1s.par_iter()
        .flat_map_iter(|&y1| {
            linspace(-c, c, k).flat_map(move |y2| {
                linspace(-c, c, k).flat_map(move |y3| {
                    linspace(-c, c, k).map(move |y4| {
                        let y = Vec4::new(y1, y2, y3, y4);
                        let a = model.profile.alpha;
                        let v = [
                            (a * model.bump(&y)).abs(),
                            (model.bump_gradient(&y) * a).amax(),
                            (model.bump_hessian(&y) * a).amax(),
                        ];
                        (y, v)
                    })
                })
            })
        })
        .collect()
}

pub fn write_grid_csv<W: Write + ?Sized>(out: &mut W, rows: &[(Vec4, [f64; 3])]) -> Result<()> {
    writeln!(out, "y1,y2,y3,y4,c0,c1,c2")?;
    for (y, v) in rows {
        writeln!(out, "{:e},{:e},{:e},{:e},{:e},{:e},{:e}", y[0], y[1], y[2], y[3], v[0], v[1], v[2])?;
    }
    Ok(())
}

/// All certificate quantities, without asserting any bound.
pub fn certificate_report(profile: &BumpProfile, epsilon: f64, grid: usize, cfg: &IntegratorConfig) -> Result<PerturbationCertificate> {
    if grid < MIN_GRID {
        return Err(Error::Parameter(format!("certification grid needs at least {MIN_GRID} points")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Parameter("epsilon must be positive".into()));
    }
    let model = BumpRotation { profile: *profile };
    let (c0, c1, c2) = profile.distance_bounds();
    let rows = grid_values(profile, grid);
    let g = rows.iter().fold([0.0f64; 3], |m, (_, v)| [m[0].max(v[0]), m[1].max(v[1]), m[2].max(v[2])]);

    let tube = Tube::new(0.0, profile.rho_bar, profile.r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut support_max = 0.0f64;
    let mut n = 0;
    while n < SUPPORT_SAMPLES {
        let y = [
            rng.random_range(-0.5..1.5),
            rng.random_range(-2.0..2.0) * profile.r,
            rng.random_range(-2.0..2.0) * profile.r,
            rng.random_range(-2.0..2.0) * profile.r,
        ];
        if tube.contains(&y) {
            continue;
        }
        let v = Vec4::from(y);
        support_max = support_max.max((model.energy(&v) - v[2]).abs());
        n += 1;
    }

    let mut boundary_dx_max = 0.0f64;
    for i in 0..BOUNDARY_SAMPLES {
        let y1 = if i % 2 == 0 { 0.0 } else { profile.rho_bar };
        let y = Vec4::new(
            y1,
            rng.random_range(-1.5..1.5) * profile.r,
            rng.random_range(-1.5..1.5) * profile.r,
            rng.random_range(-1.5..1.5) * profile.r,
        );
        boundary_dx_max = boundary_dx_max.max((j4() * model.hessian(&y)).amax());
    }

    // The closed form is compared against the fourth-order scheme at the caller's step.
    let cfg = &IntegratorConfig { method: Method::Gauss2, ..*cfg };
    let sys = super::model::build_perturbed_hamiltonian(profile);
    let target = rotation(profile.alpha);
    let disk: Vec<(f64, f64, f64)> = disk_points(profile)
        .par_iter()
        .map(|y| -> Result<(f64, f64, f64)> {
            let st = integrate_tangent(&sys, y, 1.0, cfg)?;
            let (yc, fc) = model.closed_form(y, 1.0)?;
            Ok(((fiber_block(&st.f) - target).amax(), (st.y - yc).amax(), (st.f - fc).amax()))
        })
        .collect::<Result<_>>()?;
    let fold = |k: usize| disk.iter().map(|d| [d.0, d.1, d.2][k]).fold(0.0, f64::max);

    Ok(PerturbationCertificate {
        alpha: profile.alpha,
        r: profile.r,
        nu: profile.nu,
        xi: profile.xi,
        xi_prime: profile.xi_prime,
        rho_bar: profile.rho_bar,
        ell0: profile.ell0,
        epsilon,
        c0,
        c1,
        c2,
        grid_c0: g[0],
        grid_c1: g[0].max(g[1]),
        grid_c2: g[0].max(g[1]).max(g[2]),
        grid_points: rows.len(),
        c_u: profile.universal_constant(),
        support_ok: support_max <= 1e-15,
        support_max,
        boundary_dx_ok: boundary_dx_max <= 1e-12,
        boundary_dx_max,
        rotation_error: fold(0),
        flow_state_error: fold(1),
        flow_differential_error: fold(2),
        alpha0_used: profile.alpha0(epsilon),
    })
}

/// Certificate of the perturbed model; the first violated bound is an error.
pub fn certify(profile: &BumpProfile, epsilon: f64, grid: usize) -> Result<PerturbationCertificate> {
    let cert = certificate_report(profile, epsilon, grid, &IntegratorConfig::default())?;
    match cert.violations().into_iter().next() {
        Some(e) => Err(e),
        None => Ok(cert),
    }
}

/// Supremum of third derivatives of `H - H0` (differences of the analytic
/// Hessian) on a grid laid out relative to each `r`.
pub fn c3_blowup_probe(r_list: &[f64], nu: f64, alpha: f64) -> Result<Vec<(f64, f64)>> {
    if r_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Parameter("r_list must be strictly decreasing".into()));
    }
    r_list
        .iter()
        .map(|&r| {
            let profile = build_bumps(r, nu, Default::default())?.with_alpha(alpha)?;
            let model = BumpRotation { profile };
            let h = 1e-4 * r;
            let y1s = [0.5 * profile.xi, 0.5 * (profile.xi + profile.xi_prime)];
            let mut c3 = 0.0f64;
            for &y1 in &y1s {
                for y3 in linspace(-r, r, 9) {
                    for rho in linspace(r * nu, r, 41) {
                        for a in 0..8 {
                            let th = std::f64::consts::TAU * a as f64 / 8.0;
                            let y = Vec4::new(y1, rho * th.cos(), y3, rho * th.sin());
                            for k in 0..4 {
                                let e = Vec4::ith(k, h);
                                let d = (model.bump_hessian(&(y + e)) - model.bump_hessian(&(y - e))) / (2.0 * h);
                                c3 = c3.max(alpha * d.amax());
                            }
                        }
                    }
                }
            }
            Ok((r, c3))
        })
        .collect()
}
