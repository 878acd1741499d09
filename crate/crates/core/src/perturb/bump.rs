//! Smooth bump profiles `l`, `l~`, `phi` and their measured sup-norm bounds.

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

/// Value and first three derivatives.
pub type Jet = [f64; 4];

/// `s(x) = 1 / (1 + e^u)`, `u = 1/x - 1/(1-x)`: 0 for `x <= 0`, 1 for `x >= 1`.
pub fn smoothstep(x: f64) -> Jet {
    if x <= 0.0 {
        return [0.0; 4];
    }
    if x >= 1.0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    let y = 1.0 - x;
    let u = 1.0 / x - 1.0 / y;
    let u1 = -1.0 / (x * x) - 1.0 / (y * y);
    let u2 = 2.0 / (x * x * x) - 2.0 / (y * y * y);
    let u3 = -6.0 / x.powi(4) - 6.0 / y.powi(4);
    // p = 1/(1+e^u) and 1-p, each without cancellation.
    let (p, pc) = if u > 0.0 {
        let e = (-u).exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    } else {
        let e = u.exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    };
    let q = p * pc;
    let d1 = -q * u1;
    let q1 = d1 * (pc - p);
    let d2 = -q1 * u1 - q * u2;
    let q2 = d2 * (pc - p) - 2.0 * d1 * d1;
    let d3 = -(q2 * u1 + 2.0 * q1 * u2 + q * u3);
    [p, d1, d2, d3]
}

/// Jet of `x -> s((x - a) * k)`.
fn scaled_step(x: f64, a: f64, k: f64) -> Jet {
    let s = smoothstep((x - a) * k);
    [s[0], s[1] * k, s[2] * k * k, s[3] * k * k * k]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Universal {
    pub xi: f64,
    pub xi_prime: f64,
    pub rho_bar: f64,
}

impl Default for Universal {
    fn default() -> Self {
        Self { xi: 0.2, xi_prime: 0.6, rho_bar: 0.9 }
    }
}

/// `V_{a,b,c} = {a < y1 < b, rho < c, |y3| < c}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tube {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Tube {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a < b && c > 0.0) {
            return Err(Error::Parameter(format!("invalid tube ({a}, {b}, {c})")));
        }
        Ok(Self { a, b, c })
    }

    pub fn contains(&self, y: &[f64; 4]) -> bool {
        self.a < y[0] && y[0] < self.b && y[1].hypot(y[3]) < self.c && y[2].abs() < self.c
    }
}

/// Sup norms of the profile derivatives at unit amplitude, each including
/// half the largest neighbour difference on a fine grid as a safety margin.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProfileBounds {
    pub ell: [f64; 3],
    pub ell_tilde: [f64; 3],
    pub phi: [f64; 3],
    /// `sup max(|phi'/rho|, |phi''|)`, the diagonal radial Hessian factor.
    pub radial_diag: f64,
    /// `sup |phi'' - phi'/rho| / 2`, the off-diagonal radial Hessian factor.
    pub radial_off: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpProfile {
    pub xi: f64,
    pub xi_prime: f64,
    pub rho_bar: f64,
    pub r: f64,
    pub nu: f64,
    pub alpha: f64,
    pub ell0: f64,
    pub bounds: ProfileBounds,
}

const BOUND_GRID: usize = 20_001;

fn grid_sup<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let h = (b - a) / (BOUND_GRID - 1) as f64;
    let mut prev = f(a);
    let (mut sup, mut jump) = (prev.abs(), 0.0f64);
    for i in 1..BOUND_GRID {
        let v = f(a + i as f64 * h);
        sup = sup.max(v.abs());
        jump = jump.max((v - prev).abs());
        prev = v;
    }
    sup + 0.5 * jump
}

pub fn build_bumps(r: f64, nu: f64, universal: Universal) -> Result<BumpProfile> {
    let Universal { xi, xi_prime, rho_bar } = universal;
    if !(0.0 < r && r < 1.0) {
        return Err(Error::Parameter(format!("r = {r} not in (0, 1)")));
    }
    if !(0.0 < nu && nu < 1.0) {
        return Err(Error::Parameter(format!("nu = {nu} not in (0, 1)")));
    }
    if !(0.0 < xi && xi < xi_prime && xi_prime < rho_bar && rho_bar < 1.0) {
        return Err(Error::Parameter("need 0 < xi < xi' < rho_bar < 1".into()));
    }
    let mut p = BumpProfile { xi, xi_prime, rho_bar, r, nu, alpha: 0.0, ell0: 1.0, bounds: ProfileBounds::default() };
    let mass = adaptive_simpson(|s| p.ell(s)[0], 0.0, xi, 1e-15)
        + (xi_prime - xi)
        + adaptive_simpson(|s| p.ell(s)[0], xi_prime, rho_bar, 1e-15);
    p.ell0 = 1.0 / mass;
    p.bounds = p.measure_bounds();
    Ok(p)
}

impl BumpProfile {
    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!("alpha = {alpha} must be finite and >= 0")));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn universal(&self) -> Universal {
        Universal { xi: self.xi, xi_prime: self.xi_prime, rho_bar: self.rho_bar }
    }

    /// `l`: rises on `(0, xi)`, equals `l0` on `[xi, xi']`, falls on `(xi', rho_bar)`.
    pub fn ell(&self, s: f64) -> Jet {
        let j = if s <= self.xi {
            scaled_step(s, 0.0, 1.0 / self.xi)
        } else if s < self.xi_prime {
            [1.0, 0.0, 0.0, 0.0]
        } else {
            scaled_step(s, self.rho_bar, -1.0 / (self.rho_bar - self.xi_prime))
        };
        j.map(|v| v * self.ell0)
    }

    /// `int_a^b l`, split at the knots of `l` so the quadrature sees smooth pieces.
    pub fn ell_integral(&self, a: f64, b: f64) -> f64 {
        if a > b {
            return -self.ell_integral(b, a);
        }
        let knots = [f64::NEG_INFINITY, 0.0, self.xi, self.xi_prime, self.rho_bar, f64::INFINITY];
        knots
            .windows(2)
            .map(|w| {
                let (lo, hi) = (a.max(w[0]), b.min(w[1]));
                if lo >= hi || w[1] <= 0.0 || w[0] >= self.rho_bar {
                    0.0
                } else if w[0] == self.xi {
                    (hi - lo) * self.ell0
                } else {
                    adaptive_simpson(|s| self.ell(s)[0], lo, hi, 1e-15)
                }
            })
            .sum()
    }

    /// `l~`: 1 on `|s| <= r nu`, 0 on `|s| >= r`.
    pub fn ell_tilde(&self, s: f64) -> Jet {
        let w = (1.0 - self.nu) * self.r;
        let j = scaled_step(s.abs(), self.r, -1.0 / w);
        if s < 0.0 {
            [j[0], -j[1], j[2], -j[3]]
        } else {
            j
        }
    }

    /// Radial cutoff `sigma(rho)` with `phi = rho^2 sigma / 2`.
    pub fn sigma(&self, rho: f64) -> Jet {
        scaled_step(rho, self.r, -1.0 / ((1.0 - self.nu) * self.r))
    }

    pub fn phi(&self, rho: f64) -> Jet {
        let s = self.sigma(rho);
        let h = 0.5 * rho * rho;
        [
            h * s[0],
            rho * s[0] + h * s[1],
            s[0] + 2.0 * rho * s[1] + h * s[2],
            3.0 * s[1] + 3.0 * rho * s[2] + h * s[3],
        ]
    }

    /// `phi'(rho) / rho`, smooth through 0.
    pub fn psi1(&self, rho: f64) -> f64 {
        let s = self.sigma(rho);
        s[0] + 0.5 * rho * s[1]
    }

    /// `(phi'' - phi'/rho) / rho^2`, smooth through 0.
    pub fn psi2(&self, rho: f64) -> f64 {
        let s = self.sigma(rho);
        let a = if rho > 0.0 { 1.5 * s[1] / rho } else { 0.0 };
        a + 0.5 * s[2]
    }

    pub fn inner_radius(&self) -> f64 {
        self.r * self.nu
    }

    fn measure_bounds(&self) -> ProfileBounds {
        let mut b = ProfileBounds::default();
        for k in 0..3 {
            b.ell[k] = grid_sup(|s| self.ell(s)[k], 0.0, self.rho_bar);
            b.ell_tilde[k] = grid_sup(|s| self.ell_tilde(s)[k], 0.0, self.r);
            b.phi[k] = grid_sup(|p| self.phi(p)[k], 0.0, self.r);
        }
        b.radial_diag = grid_sup(|p| self.psi1(p).abs().max(self.phi(p)[2].abs()), 0.0, self.r);
        b.radial_off = grid_sup(|p| 0.5 * (self.phi(p)[2] - self.psi1(p)), 0.0, self.r);
        b
    }

    /// Measured profile bounds divided by the stated bounds.
    pub fn profile_ratios(&self) -> [(&'static str, f64); 5] {
        let (r, nu) = (self.r, self.nu);
        let w = (1.0 - nu) * r;
        let b = &self.bounds;
        [
            ("ell_tilde'", b.ell_tilde[1] / (2.0 / w)),
            ("ell_tilde''", b.ell_tilde[2] / (4.0 / (w * w))),
            ("phi", b.phi[0] / (r * nu).powi(2)),
            ("phi'", b.phi[1] / (2.0 * r * nu * nu / (1.0 - nu))),
            ("phi''", b.phi[2] / (2.0 * nu / (1.0 - nu)).powi(2)),
        ]
    }

    /// Certified `(C0, C1, C2)` norms of `H - H0` from the separable bounds.
    pub fn distance_bounds(&self) -> (f64, f64, f64) {
        let b = &self.bounds;
        let a = self.alpha;
        let (l, lt, ph) = (b.ell, b.ell_tilde, b.phi);
        let c0 = a * l[0] * lt[0] * ph[0];
        let first = [l[1] * lt[0] * ph[0], l[0] * lt[1] * ph[0], l[0] * lt[0] * ph[1]];
        let second = [
            l[2] * lt[0] * ph[0],
            l[1] * lt[1] * ph[0],
            l[0] * lt[2] * ph[0],
            l[1] * lt[0] * ph[1],
            l[0] * lt[1] * ph[1],
            l[0] * lt[0] * b.radial_diag,
            l[0] * lt[0] * b.radial_off,
        ];
        let c1 = first.iter().fold(c0, |m, v| m.max(a * v));
        let c2 = second.iter().fold(c1, |m, v| m.max(a * v));
        (c0, c1, c2)
    }

    /// Largest ratio of a measured bound to its stated form, at unit amplitude.
    pub fn universal_constant(&self) -> f64 {
        let unit = Self { alpha: 1.0, ..*self };
        let (_, c1, c2) = unit.distance_bounds();
        let (r, nu) = (self.r, self.nu);
        let c1_ratio = c1 / (r * nu / (1.0 - nu));
        let c2_ratio = c2 / (1.0 - nu).powi(-2);
        self.profile_ratios().iter().map(|p| p.1).fold(c1_ratio.max(c2_ratio), f64::max)
    }

    /// `min(eps (1-nu)^2 / c_u, 2 / (|l|_0 r nu))`.
    pub fn alpha0(&self, epsilon: f64) -> f64 {
        let a = epsilon * (1.0 - self.nu).powi(2) / self.universal_constant();
        a.min(2.0 / (self.ell0 * self.r * self.nu))
    }
}
