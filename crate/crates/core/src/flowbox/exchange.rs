//! Direction exchange for linear cocycles: small rotations interleaved with the
//! cocycle blocks that carry the expanding direction onto the contracting one.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::lyapunov::{most_contracted, op_norm, RenormalizedProduct};
use crate::symplectic::{rotation, Mat2, Vec2};

/// Largest admissible angle between `L^m n+` and the target direction.
pub const EXCHANGE_TOL: f64 = 1e-6;
/// Ratio `|Phi^m n-| / |Phi^m n+|` required by the exchange hypothesis.
pub const EXCHANGE_RATIO: f64 = 0.5;
/// Blocks used to re-estimate the contracting direction inside `decay_demo`.
const TAIL_WINDOW: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangePlan {
    /// `alpha_i`, applied before block `i`.
    pub angles: Vec<f64>,
    /// `L^m = B_m R_m ... B_1 R_1`.
    pub product: Mat2,
    /// Smallest rotation cap for which an exchange exists.
    pub cap: f64,
    /// Angle between `L^m n+` and the transported `n-`.
    pub residual: f64,
    /// `|Phi^m n-| / |Phi^m n+|` for the unrotated blocks.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayOutcome {
    /// `(1/t) log |L^t|` for the modified product.
    pub value: f64,
    /// `(1/t) log |Phi^t|` for the blocks as given.
    pub raw: f64,
    /// Index of the first rotated block.
    pub start: usize,
    /// Exchange window length.
    pub m: usize,
    /// One angle per block; zero outside the window.
    pub angles: Vec<f64>,
    pub hypothesis_held: bool,
}

fn arg(v: &Vec2) -> f64 {
    v[1].atan2(v[0])
}

fn dir(theta: f64) -> Vec2 {
    Vec2::new(theta.cos(), theta.sin())
}

/// Unoriented angle in `[0, pi/2]`.
pub fn line_angle(a: &Vec2, b: &Vec2) -> f64 {
    let c = (a[0] * b[1] - a[1] * b[0]).abs();
    let d = a.dot(b).abs();
    c.atan2(d)
}

/// Representative of `x` mod pi in `[base, base + pi)`.
fn lift(x: f64, base: f64) -> f64 {
    base + (x - base).rem_euclid(PI)
}

/// Arc `[lo, lo + len]` of the projective line.
#[derive(Debug, Clone, Copy)]
struct Arc {
    lo: f64,
    len: f64,
}

impl Arc {
    fn point(theta: f64) -> Self {
        Self { lo: theta, len: 0.0 }
    }

    fn full(&self) -> bool {
        self.len >= PI
    }

    fn widen(&self, c: f64) -> Self {
        Self { lo: self.lo - c, len: (self.len + 2.0 * c).min(PI) }
    }

    fn image(&self, b: &Mat2) -> Self {
        if self.full() {
            return Self { lo: arg(&(b * dir(0.0))), len: PI };
        }
        let f = |t: f64| arg(&(b * dir(t)));
        let (flo, fhi) = (f(self.lo), f(self.lo + self.len));
        if b.determinant() >= 0.0 {
            Self { lo: flo, len: (fhi - flo).rem_euclid(PI) }
        } else {
            Self { lo: fhi, len: (flo - fhi).rem_euclid(PI) }
        }
    }

    /// Distance mod pi from `theta` to the arc.
    fn distance(&self, theta: f64) -> f64 {
        if self.full() {
            return 0.0;
        }
        let t = lift(theta, self.lo);
        if t <= self.lo + self.len {
            0.0
        } else {
            (t - self.lo - self.len).min(self.lo + PI - t)
        }
    }

    /// Point of the arc closest to `theta`, lifted near `theta`.
    fn clamp(&self, theta: f64) -> f64 {
        if self.full() {
            return theta;
        }
        let t = lift(theta, self.lo);
        let hi = self.lo + self.len;
        if t <= hi {
            theta
        } else if t - hi <= self.lo + PI - t {
            theta - (t - hi)
        } else {
            theta + (self.lo + PI - t)
        }
    }
}

/// Reachable sets `S_k` of the `n+` direction with rotations capped at `cap`.
fn reachable(blocks: &[Mat2], start: f64, cap: f64) -> Vec<Arc> {
    let mut sets = vec![Arc::point(start)];
    for b in blocks {
        let next = sets.last().expect("nonempty").widen(cap).image(b);
        sets.push(next);
    }
    sets
}

fn product(blocks: &[Mat2], angles: &[f64]) -> Mat2 {
    blocks.iter().zip(angles).fold(Mat2::identity(), |acc, (b, a)| b * rotation(*a) * acc)
}

fn raw_product(blocks: &[Mat2]) -> Mat2 {
    blocks.iter().fold(Mat2::identity(), |acc, b| b * acc)
}

/// Wraps an angle difference mod pi into `[-pi/2, pi/2)`.
fn wrap(a: f64) -> f64 {
    (a + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2
}

fn backward(blocks: &[Mat2], sets: &[Arc], start: f64, target: f64) -> Result<Vec<f64>> {
    let m = blocks.len();
    let mut angles = vec![0.0; m];
    let mut goal = target;
    for k in (0..m).rev() {
        let inv = blocks[k]
            .try_inverse()
            .ok_or_else(|| Error::NoExchange { achieved: f64::NAN, reason: "singular block".into() })?;
        let pre = arg(&(inv * dir(goal)));
        let from = if k == 0 { start } else { sets[k].clamp(pre) };
        angles[k] = wrap(pre - from);
        goal = from;
    }
    Ok(angles)
}

/// Exchange without the domination hypothesis check.
pub fn plan_exchange(blocks: &[Mat2], n_plus: &Vec2, n_minus: &Vec2, alpha0: f64) -> Result<ExchangePlan> {
    if blocks.is_empty() {
        return Err(Error::Parameter("exchange needs at least one block".into()));
    }
    if !(0.0..=FRAC_PI_2).contains(&alpha0) {
        return Err(Error::Parameter(format!("alpha0 = {alpha0} outside [0, pi/2]")));
    }
    let phi = raw_product(blocks);
    let plus_end = phi * n_plus;
    let minus_end = phi * n_minus;
    let ratio = minus_end.norm() / plus_end.norm();
    let start = arg(n_plus);
    let target = arg(&minus_end);
    let miss = |cap: f64| reachable(blocks, start, cap).last().expect("nonempty").distance(target);
    let achieved = miss(alpha0);
    if achieved > EXCHANGE_TOL * 1e-3 {
        return Err(Error::NoExchange { achieved, reason: format!("unreachable within alpha0 = {alpha0}") });
    }
    let (mut lo, mut hi) = (0.0, alpha0);
    if miss(0.0) <= EXCHANGE_TOL * 1e-3 {
        hi = 0.0;
    }
    for _ in 0..60 {
        if hi - lo <= 1e-15 * (1.0 + hi) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if miss(mid) <= 1e-13 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let sets = reachable(blocks, start, hi);
    let angles: Vec<f64> = backward(blocks, &sets, start, target)?
        .into_iter()
        .map(|a| a.clamp(-alpha0, alpha0))
        .collect();
    let l = product(blocks, &angles);
    let residual = line_angle(&(l * n_plus), &minus_end);
    if residual > EXCHANGE_TOL {
        return Err(Error::NoExchange { achieved: residual, reason: "schedule failed verification".into() });
    }
    Ok(ExchangePlan { angles, product: l, cap: hi, residual, ratio })
}

/// Exchange over `m = blocks.len()` unit blocks. Requires the splitting to be
/// non-dominated over the window, `|Phi^m n-| / |Phi^m n+| >= 1/2`.
pub fn exchange_schedule(blocks: &[Mat2], n_plus: &Vec2, n_minus: &Vec2, alpha0: f64) -> Result<ExchangePlan> {
    let phi = raw_product(blocks);
    let ratio = (phi * n_minus).norm() / (phi * n_plus).norm();
    if ratio < EXCHANGE_RATIO {
        let achieved = line_angle(&(phi * n_plus), &(phi * n_minus));
        return Err(Error::NoExchange { achieved, reason: format!("dominated: ratio {ratio} < 1/2") });
    }
    plan_exchange(blocks, n_plus, n_minus, alpha0)
}

/// Normalized product of at most `TAIL_WINDOW` leading blocks.
fn tail(blocks: &[Mat2]) -> Mat2 {
    let mut p = RenormalizedProduct::default();
    for b in blocks.iter().take(TAIL_WINDOW) {
        p.push(b);
    }
    p.normalized()
}

fn exponent(blocks: &[Mat2]) -> f64 {
    let mut p = RenormalizedProduct::default();
    for b in blocks {
        p.push(b);
    }
    p.log_norm() / blocks.len() as f64
}

/// `log |B_t R_t ... B_1 R_1|` evaluated in the splitting frames of the
/// unrotated blocks. In the standard basis the contracting component is lost
/// to cancellation once the products are large.
pub fn adapted_log_norm(blocks: &[Mat2], angles: &[f64], n_plus: &Vec2) -> f64 {
    let t = blocks.len();
    let mut plus = vec![n_plus.normalize()];
    for b in blocks {
        let next = (b * plus.last().expect("nonempty")).normalize();
        plus.push(next);
    }
    let mut minus: Vec<Vec2> = (0..t).map(|j| most_contracted(&tail(&blocks[j..]))).collect();
    let last = (blocks[t - 1] * minus[t - 1]).normalize();
    minus.push(last);
    let frame = |j: usize| Mat2::from_columns(&[plus[j], minus[j]]);
    let mut prod = RenormalizedProduct::default();
    for j in 0..t {
        let inv = frame(j + 1).try_inverse().unwrap_or_else(Mat2::identity);
        prod.push(&(inv * blocks[j] * rotation(angles[j]) * frame(j)));
    }
    let n = prod.normalized();
    let back = frame(0).try_inverse().unwrap_or_else(Mat2::identity);
    prod.log_norm() - op_norm(&n).ln() + op_norm(&(frame(t) * n * back)).ln()
}

/// Lowers the exponent of `B_t ... B_1` below `delta` by one exchange of the
/// splitting near `t/2`.
pub fn decay_demo(blocks: &[Mat2], n_plus: &Vec2, n_minus: &Vec2, delta: f64, alpha0: f64) -> Result<DecayOutcome> {
    let t = blocks.len();
    if t == 0 {
        return Err(Error::Parameter("decay needs at least one block".into()));
    }
    let raw = exponent(blocks);
    if raw < delta {
        return Ok(DecayOutcome { value: raw, raw, start: 0, m: 0, angles: Vec::new(), hypothesis_held: true });
    }
    let mut last = Error::NoExchange { achieved: f64::NAN, reason: "no window tried".into() };
    let m_max = t.min(8);
    for m in 1..=m_max {
        let mut starts: Vec<usize> = (0..=t - m).collect();
        let mid = (t - m) as f64 / 2.0;
        starts.sort_by(|a, b| (*a as f64 - mid).abs().total_cmp(&(*b as f64 - mid).abs()).then(a.cmp(b)));
        for k in starts {
            let p = (raw_product(&blocks[..k]) * n_plus).normalize();
            // Forward transport of n- loses it to round-off; recover it from the tail.
            let q = if k == 0 { n_minus.normalize() } else { most_contracted(&tail(&blocks[k..])) };
            let window = &blocks[k..k + m];
            let plan = match plan_exchange(window, &p, &q, alpha0) {
                Ok(plan) => plan,
                Err(e) => {
                    last = e;
                    continue;
                }
            };
            let mut angles = vec![0.0; t];
            angles[k..k + m].copy_from_slice(&plan.angles);
            let value = adapted_log_norm(blocks, &angles, n_plus) / t as f64;
            if value < delta {
                return Ok(DecayOutcome {
                    value,
                    raw,
                    start: k,
                    m,
                    angles,
                    hypothesis_held: plan.ratio >= EXCHANGE_RATIO,
                });
            }
        }
    }
    Err(last)
}

/// `op_norm` of the rotated product, for callers holding an angle schedule.
pub fn rotated_norm(blocks: &[Mat2], angles: &[f64]) -> f64 {
    op_norm(&product(blocks, angles))
}
