//! Symplectic linear algebra on (R^4, w0) with w0 = dy1^dy3 + dy2^dy4.
//!
//! With `J = [[0, I], [-I, 0]]` we have `w0(v, w) = v^T J w` and `X_H = J grad H`.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};

pub type Vec4 = Vector4<f64>;
pub type Mat4 = Matrix4<f64>;
pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;
pub type Phase4 = Vec4;

pub fn j4() -> Mat4 {
    Mat4::new(
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, -1.0, 0.0, 0.0,
    )
}

/// `J v` without a matrix product.
#[inline]
pub fn apply_j(v: &Vec4) -> Vec4 {
    Vec4::new(v[2], v[3], -v[0], -v[1])
}

#[inline]
pub fn omega(v: &Vec4, w: &Vec4) -> f64 {
    v.dot(&apply_j(w))
}

/// `max |F^T J F - J|` entrywise.
pub fn symplectic_residual(f: &Mat4) -> f64 {
    let j = j4();
    (f.transpose() * j * f - j).abs().max()
}

pub fn rotation(angle: f64) -> Mat2 {
    let (s, c) = angle.sin_cos();
    Mat2::new(c, -s, s, c)
}

pub fn all_finite(v: &Vec4) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Axis-aligned box in R^4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box4 {
    pub lo: Vec4,
    pub hi: Vec4,
}

impl Box4 {
    pub fn new(lo: Vec4, hi: Vec4) -> Self {
        Self { lo, hi }
    }

    pub fn cube(half_width: f64) -> Self {
        Self::around(&Vec4::zeros(), half_width)
    }

    pub fn around(center: &Vec4, half_width: f64) -> Self {
        let h = Vec4::repeat(half_width);
        Self { lo: center - h, hi: center + h }
    }

    pub fn contains(&self, y: &Vec4) -> bool {
        (0..4).all(|i| y[i] >= self.lo[i] && y[i] <= self.hi[i])
    }

    pub fn is_valid(&self) -> bool {
        (0..4).all(|i| self.lo[i].is_finite() && self.hi[i].is_finite() && self.lo[i] < self.hi[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_squares_to_minus_identity() {
        let j = j4();
        assert_eq!(j * j, -Mat4::identity());
        assert_eq!(j.transpose(), -j);
    }

    #[test]
    fn omega_pairs_one_three_and_two_four() {
        let e = |k: usize| Vec4::from_fn(|i, _| if i == k { 1.0 } else { 0.0 });
        assert_eq!(omega(&e(0), &e(2)), 1.0);
        assert_eq!(omega(&e(1), &e(3)), 1.0);
        assert_eq!(omega(&e(0), &e(1)), 0.0);
        assert_eq!(omega(&e(2), &e(0)), -1.0);
    }

    #[test]
    fn apply_j_matches_matrix() {
        let v = Vec4::new(1.0, -2.0, 3.5, 0.25);
        assert_eq!(apply_j(&v), j4() * v);
    }
}
