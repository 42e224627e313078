//! Eccentric annuli `B_{R1}(0) \ closed B_{R0}(s e1)`, half-plane polarizers and caps.
//!
//! Two angle conventions live here and are never mixed: mesh rays use the
//! angle `phi` measured counter-clockwise from `+e1` about the inner center,
//! while [`polar_angle`] returns the angle measured from `-e1`.

use std::ops::{Add, Mul, Neg, Sub};

use serde::Serialize;

use crate::error::{Error, Result};

/// Absolute tolerance for length predicates, applied after normalizing by `R1`.
pub const LENGTH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the planar cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Reflection across the `e1`-axis, `x2 -> -x2`.
    pub fn mirror_x2(self) -> Point {
        Point::new(self.x, -self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

impl Mul<Point> for f64 {
    type Output = Point;
    fn mul(self, p: Point) -> Point {
        Point::new(self * p.x, self * p.y)
    }
}

/// The domain `Omega_s = B_{R1}(0) \ closed B_{R0}(s e1)` with `0 < R0 < R1`, `0 <= s < R1 - R0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnularDomain {
    r0: f64,
    r1: f64,
    s: f64,
}

impl AnnularDomain {
    pub fn new(r0: f64, r1: f64, s: f64) -> Result<Self> {
        if !(r0.is_finite() && r1.is_finite() && s.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "non-finite parameters R0={r0}, R1={r1}, s={s}"
            )));
        }
        if r0 <= 0.0 {
            return Err(Error::InvalidDomain(format!("R0 must be positive (R0={r0})")));
        }
        if r0 >= r1 {
            return Err(Error::InvalidDomain(format!(
                "R0 < R1 violated (R0={r0}, R1={r1})"
            )));
        }
        if s < 0.0 {
            return Err(Error::InvalidDomain(format!("0 <= s violated (s={s})")));
        }
        if s >= r1 - r0 {
            return Err(Error::InvalidDomain(format!(
                "s < R1 - R0 violated (s={s}, R1-R0={})",
                r1 - r0
            )));
        }
        Ok(AnnularDomain { r0, r1, s })
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn inner_center(&self) -> Point {
        Point::new(self.s, 0.0)
    }

    /// Same radii, different offset.
    pub fn with_offset(&self, s: f64) -> Result<Self> {
        AnnularDomain::new(self.r0, self.r1, s)
    }

    /// Both radii and the offset multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        AnnularDomain::new(self.r0 * factor, self.r1 * factor, self.s * factor)
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * (self.r1 * self.r1 - self.r0 * self.r0)
    }

    /// Open-set membership: `|p| < R1` and `|p - s e1| > R0`.
    pub fn contains(&self, p: Point) -> bool {
        let tol = LENGTH_TOL * self.r1;
        p.norm() < self.r1 - tol && p.distance(self.inner_center()) > self.r0 + tol
    }

    /// Signed distance to the boundary, positive inside `Omega_s`.
    pub fn signed_distance(&self, p: Point) -> f64 {
        let outer = self.r1 - p.norm();
        let inner = p.distance(self.inner_center()) - self.r0;
        outer.min(inner)
    }

    /// Distance `t > 0` along the ray `s e1 + t (cos phi, sin phi)` to the outer circle.
    pub fn ray_exit_distance(&self, phi: f64) -> f64 {
        self.ray_exit_along(phi.cos(), phi.sin())
    }

    /// [`ray_exit_distance`](Self::ray_exit_distance) for a precomputed unit direction.
    pub fn ray_exit_along(&self, cos_phi: f64, sin_phi: f64) -> f64 {
        let s = self.s;
        let disc = self.r1 * self.r1 - s * s * sin_phi * sin_phi;
        -s * cos_phi + disc.sqrt()
    }
}

/// Closed half-plane `H = {x : h.(x - b) <= 0}` with unit outward normal `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Polarizer {
    h: Point,
    b: Point,
}

impl Polarizer {
    pub fn new(h: Point, b: Point) -> Result<Self> {
        if ((h.norm()) - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidParameter(format!(
                "polarizer normal must be a unit vector (|h| = {})",
                h.norm()
            )));
        }
        Ok(Polarizer { h, b })
    }

    /// Polarizer with normal `(cos beta, sin beta)` through `b`.
    pub fn from_angle(beta: f64, b: Point) -> Self {
        Polarizer {
            h: Point::new(beta.cos(), beta.sin()),
            b,
        }
    }

    pub fn normal(&self) -> Point {
        self.h
    }

    pub fn base(&self) -> Point {
        self.b
    }

    /// `sigma_H(x) = x - 2 (h.(x - b)) h`.
    pub fn reflect(&self, p: Point) -> Point {
        let d = 2.0 * self.h.dot(p - self.b);
        p - d * self.h
    }

    /// Signed offset `h.(p - b)`; non-positive on `H`.
    pub fn offset(&self, p: Point) -> f64 {
        self.h.dot(p - self.b)
    }

    pub fn contains(&self, p: Point) -> bool {
        self.offset(p) <= 0.0
    }

    /// `0 in dH`.
    pub fn in_h0(&self) -> bool {
        self.h.dot(self.b).abs() <= LENGTH_TOL * (1.0 + self.b.norm())
    }

    /// `H in H_0` with `h.e1 > 0`, so that `-e1` lies in the interior of `H`.
    pub fn in_h_star(&self) -> bool {
        self.in_h0() && self.h.x > 0.0
    }

    /// `H in a + H_*`: the boundary line passes through `a` and `h.e1 > 0`.
    pub fn in_translated_h_star(&self, a: Point) -> bool {
        self.h.dot(self.b - a).abs() <= LENGTH_TOL * (1.0 + (self.b - a).norm()) && self.h.x > 0.0
    }
}

/// The cap `Sigma_alpha = {x in Omega_s : x1 < alpha}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cap {
    alpha: f64,
}

impl Cap {
    pub fn new(domain: &AnnularDomain, alpha: f64) -> Result<Self> {
        if !(alpha > -domain.r1() && alpha < domain.r1()) {
            return Err(Error::InvalidParameter(format!(
                "cap threshold must satisfy -R1 < alpha < R1 (alpha={alpha})"
            )));
        }
        Ok(Cap { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x < self.alpha
    }
}

/// Polar angle `theta(p) = acos(-(p - a)/|p - a| . e1)`, in `[0, pi]`, zero on `a - R+ e1`.
pub fn polar_angle(p: Point, a: Point) -> Result<f64> {
    let d = p - a;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::DegeneratePoint);
    }
    Ok((-d.x / r).clamp(-1.0, 1.0).acos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn close(a: Point, b: Point, tol: f64) -> bool {
        a.distance(b) <= tol
    }

    #[test]
    fn domain_validation() {
        assert!(AnnularDomain::new(1.0, 5.0, 3.0).is_ok());
        assert!(AnnularDomain::new(1.0, 0.5, 0.0).is_err());
        assert!(AnnularDomain::new(0.0, 5.0, 0.0).is_err());
        assert!(AnnularDomain::new(1.0, 5.0, 4.0).is_err());
        assert!(AnnularDomain::new(1.0, 5.0, -0.1).is_err());
        let msg = AnnularDomain::new(1.0, 0.5, 0.0).unwrap_err().to_string();
        assert!(msg.contains("R0 < R1"), "{msg}");
    }

    #[test]
    fn contains_examples() {
        let d = AnnularDomain::new(1.0, 5.0, 3.0).unwrap();
        assert!(d.contains(Point::new(0.0, 0.0)));
        assert!(!d.contains(Point::new(3.0, 0.0)));
        assert!(!d.contains(Point::new(5.0, 0.0)));
        assert!(!d.contains(Point::new(2.0, 0.0)));
    }

    #[test]
    fn ray_exit_examples() {
        let d = AnnularDomain::new(1.0, 5.0, 3.0).unwrap();
        assert!((d.ray_exit_distance(0.0) - 2.0).abs() < 1e-14);
        assert!((d.ray_exit_distance(PI) - 8.0).abs() < 1e-14);
        let c = AnnularDomain::new(1.0, 5.0, 0.0).unwrap();
        for k in 0..17 {
            let phi = 0.37 * k as f64;
            assert!((c.ray_exit_distance(phi) - 5.0).abs() < 1e-14);
        }
    }

    #[test]
    fn reflect_examples() {
        let h = Polarizer::new(Point::new(1.0, 0.0), Point::ORIGIN).unwrap();
        assert!(close(h.reflect(Point::new(2.0, 1.0)), Point::new(-2.0, 1.0), 1e-15));
        let diag = Polarizer::new(Point::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2), Point::ORIGIN).unwrap();
        assert!(close(diag.reflect(Point::new(1.0, 0.0)), Point::new(0.0, -1.0), 1e-15));
        let p = Point::new(-3.0, 3.0);
        assert!(close(diag.reflect(p), p, 1e-15));
        assert!(Polarizer::new(Point::new(1.0, 1.0), Point::ORIGIN).is_err());
    }

    #[test]
    fn polarizer_families() {
        let h = Polarizer::from_angle(0.3, Point::ORIGIN);
        assert!(h.in_h0() && h.in_h_star());
        assert!(h.contains(Point::new(-1.0, 0.0)));
        let g = Polarizer::from_angle(2.0, Point::ORIGIN);
        assert!(g.in_h0() && !g.in_h_star());
        let t = Polarizer::from_angle(0.3, Point::new(2.0, 0.0));
        assert!(!t.in_h0());
        assert!(t.in_translated_h_star(Point::new(2.0, 0.0)));
    }

    #[test]
    fn polar_angle_examples() {
        let o = Point::ORIGIN;
        assert!(polar_angle(Point::new(-5.0, 0.0), o).unwrap().abs() < 1e-15);
        assert!((polar_angle(Point::new(5.0, 0.0), o).unwrap() - PI).abs() < 1e-15);
        assert!((polar_angle(Point::new(0.0, 2.0), o).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!(matches!(polar_angle(o, o), Err(Error::DegeneratePoint)));
    }

    #[test]
    fn cap_membership() {
        let d = AnnularDomain::new(1.0, 5.0, 2.0).unwrap();
        let cap = Cap::new(&d, 2.0).unwrap();
        assert!(cap.contains(Point::new(1.9, 3.0)));
        assert!(!cap.contains(Point::new(2.0, 3.0)));
        assert!(Cap::new(&d, 5.0).is_err());
    }

    proptest! {
        #[test]
        fn reflection_is_an_involution(beta in -PI..PI, bx in -3.0..3.0f64, by in -3.0..3.0f64,
                                       px in -5.0..5.0f64, py in -5.0..5.0f64) {
            let h = Polarizer::from_angle(beta, Point::new(bx, by));
            let p = Point::new(px, py);
            prop_assert!(close(h.reflect(h.reflect(p)), p, 1e-13));
            let q = p - h.offset(p) * h.normal();
            prop_assert!(close(h.reflect(q), q, 1e-13));
        }

        #[test]
        fn ray_exit_is_axis_symmetric(s in 0.0..3.99f64, phi in -PI..PI) {
            let d = AnnularDomain::new(1.0, 5.0, s).unwrap();
            let t = d.ray_exit_distance(phi);
            prop_assert!((t - d.ray_exit_distance(-phi)).abs() < 1e-12);
            prop_assert!(t >= 5.0 - s - 1e-12 && t <= 5.0 + s + 1e-12);
        }

        #[test]
        fn ray_membership_matches_exit(s in 0.0..3.9f64, phi in -PI..PI, frac in 0.0..1.0f64) {
            let d = AnnularDomain::new(1.0, 5.0, s).unwrap();
            let exit = d.ray_exit_distance(phi);
            let dir = Point::new(phi.cos(), phi.sin());
            let t = 1.0 + 1e-6 + frac * (exit - 1.0 - 2e-6);
            prop_assert!(d.contains(d.inner_center() + t * dir));
            prop_assert!(!d.contains(d.inner_center() + (exit + 1e-6) * dir));
            prop_assert!(!d.contains(d.inner_center() + (1.0 - 1e-6) * dir));
        }
    }
}
