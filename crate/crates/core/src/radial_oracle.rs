//! One-dimensional reference solutions for the concentric annulus.
//!
//! Eigenvalues come from a finite-difference discretization of
//! `-(1/r)(r u')' = tau u` and Sturm-sequence bisection; nothing here shares
//! code with the two-dimensional solvers.

use crate::fem::ProblemKind;

/// Symmetric tridiagonal pencil `A x = lambda W x`, `W` diagonal.
#[derive(Debug, Clone)]
struct Pencil {
    diag: Vec<f64>,
    off: Vec<f64>,
    weight: Vec<f64>,
}

impl Pencil {
    /// Number of eigenvalues strictly below `lambda` (inertia of `A - lambda W`).
    fn count_below(&self, lambda: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.diag.len() {
            let b2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            d = self.diag[i] - lambda * self.weight[i] - if i == 0 { 0.0 } else { b2 / d };
            if d == 0.0 {
                d = -f64::EPSILON * (self.diag[i].abs() + lambda.abs() * self.weight[i]);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn upper_bound(&self) -> f64 {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let l = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
                let r = if i + 1 < n { self.off[i].abs() } else { 0.0 };
                (self.diag[i].abs() + l + r) / self.weight[i]
            })
            .fold(0.0, f64::max)
    }

    fn smallest(&self) -> f64 {
        let mut lo = 0.0;
        let mut hi = self.upper_bound();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn build_pencil(kind: ProblemKind, r0: f64, r1: f64, n: usize) -> Pencil {
    let h = (r1 - r0) / n as f64;
    let h2 = h * h;
    let r = |i: f64| r0 + i * h;
    let (inner_dirichlet, outer_dirichlet) = match kind {
        ProblemKind::ND => (true, false),
        ProblemKind::DN => (false, true),
        ProblemKind::DD => (true, true),
    };
    let first = if inner_dirichlet { 1 } else { 0 };
    let last = if outer_dirichlet { n - 1 } else { n };
    let mut diag = Vec::new();
    let mut weight = Vec::new();
    let mut off = Vec::new();
    for i in first..=last {
        let fi = i as f64;
        let lm = r(fi - 0.5);
        let lp = r(fi + 0.5);
        if i == 0 {
            // ghost u_{-1} = u_1, row scaled by r_{1/2} / (r_{-1/2} + r_{1/2})
            let c = lp / (lm + lp);
            diag.push(lp / h2);
            weight.push(c * r(fi));
        } else if i == n {
            let c = lm / (lm + lp);
            diag.push(lm / h2);
            weight.push(c * r(fi));
        } else {
            diag.push((lm + lp) / h2);
            weight.push(r(fi));
        }
        if i < last {
            off.push(-lp / h2);
        }
    }
    Pencil { diag, off, weight }
}

/// Smallest eigenvalue on an `n`-interval grid without extrapolation.
pub fn concentric_eigenvalue_raw(kind: ProblemKind, r0: f64, r1: f64, n: usize) -> f64 {
    build_pencil(kind, r0, r1, n).smallest()
}

/// Richardson-extrapolated first eigenvalue of the concentric annulus.
pub fn concentric_eigenvalue(kind: ProblemKind, r0: f64, r1: f64, n: usize) -> f64 {
    assert!(n >= 200, "radial oracle needs at least 200 intervals");
    assert!(0.0 < r0 && r0 < r1, "radial oracle needs 0 < R0 < R1");
    let coarse = concentric_eigenvalue_raw(kind, r0, r1, n);
    let fine = concentric_eigenvalue_raw(kind, r0, r1, 2 * n);
    (4.0 * fine - coarse) / 3.0
}

/// Closed-form torsion function of the concentric annulus (zero on the inner
/// circle, zero flux on the outer circle).
#[derive(Debug, Clone, Copy)]
pub struct ConcentricTorsion {
    pub r0: f64,
    pub r1: f64,
    /// Torsional rigidity `2 pi int v r dr`.
    pub rigidity: f64,
}

impl ConcentricTorsion {
    pub fn value(&self, r: f64) -> f64 {
        (self.r0 * self.r0 - r * r) / 4.0 + 0.5 * self.r1 * self.r1 * (r / self.r0).ln()
    }

    pub fn derivative(&self, r: f64) -> f64 {
        -0.5 * r + 0.5 * self.r1 * self.r1 / r
    }

    pub fn second_derivative(&self, r: f64) -> f64 {
        -0.5 - 0.5 * self.r1 * self.r1 / (r * r)
    }
}

pub fn concentric_torsion(r0: f64, r1: f64) -> ConcentricTorsion {
    assert!(0.0 < r0 && r0 < r1, "concentric torsion needs 0 < R0 < R1");
    let mut t = ConcentricTorsion { r0, r1, rigidity: 0.0 };
    let f = |r: f64| t.value(r) * r;
    let integral = adaptive_simpson(&f, r0, r1, 1e-12, 50);
    t.rigidity = 2.0 * std::f64::consts::PI * integral;
    t
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn second_order_self_convergence() {
        for kind in [ProblemKind::ND, ProblemKind::DN, ProblemKind::DD] {
            let a = concentric_eigenvalue_raw(kind, 1.0, 2.0, 200);
            let b = concentric_eigenvalue_raw(kind, 1.0, 2.0, 400);
            let c = concentric_eigenvalue_raw(kind, 1.0, 2.0, 800);
            let ratio = (a - b) / (b - c);
            assert!((ratio - 4.0).abs() < 0.1, "{kind:?} ratio {ratio}");
        }
    }

    #[test]
    fn mixed_below_dirichlet() {
        for (r0, r1) in [(1.0, 2.0), (1.0, 5.0), (0.5, 5.0)] {
            let nd = concentric_eigenvalue(ProblemKind::ND, r0, r1, 400);
            let dd = concentric_eigenvalue(ProblemKind::DD, r0, r1, 400);
            assert!(nd < dd);
        }
    }

    #[test]
    fn dirichlet_thin_annulus_tends_to_interval() {
        // width 0.01 at radius 100: curvature effects are negligible
        let dd = concentric_eigenvalue(ProblemKind::DD, 100.0, 100.01, 400);
        let interval = (PI / 0.01).powi(2);
        assert!((dd - interval).abs() / interval < 1e-6);
    }

    #[test]
    fn scaling_law() {
        for kind in [ProblemKind::ND, ProblemKind::DN, ProblemKind::DD] {
            let base = concentric_eigenvalue(kind, 1.0, 2.0, 400);
            let scaled = concentric_eigenvalue(kind, 3.0, 6.0, 400);
            assert!((scaled - base / 9.0).abs() <= 1e-8 * base / 9.0);
        }
    }

    #[test]
    fn extrapolation_is_grid_invariant() {
        for kind in [ProblemKind::ND, ProblemKind::DN, ProblemKind::DD] {
            let a = concentric_eigenvalue(kind, 1.0, 5.0, 2000);
            let b = concentric_eigenvalue(kind, 1.0, 5.0, 4000);
            assert!((a - b).abs() <= 1e-8 * b, "{kind:?}: {a} vs {b}");
        }
    }

    #[test]
    fn torsion_profile_satisfies_problem() {
        let t = concentric_torsion(1.0, 2.0);
        assert_eq!(t.value(1.0), 0.0);
        assert!(t.derivative(2.0).abs() < 1e-15);
        for k in 0..=10 {
            let r = 1.0 + k as f64 * 0.1;
            let lap = t.second_derivative(r) + t.derivative(r) / r;
            assert!((lap + 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn torsion_quadrature_matches_antiderivative() {
        let (a, b) = (1.0f64, 2.0f64);
        // int ((a^2 - r^2)/4 r + b^2/2 r ln(r/a)) dr in closed form
        let prim = |r: f64| {
            a * a * r * r / 8.0 - r.powi(4) / 16.0
                + b * b / 2.0 * (r * r / 2.0 * (r / a).ln() - r * r / 4.0)
        };
        let exact = 2.0 * PI * (prim(b) - prim(a));
        let t = concentric_torsion(a, b);
        assert!((t.rigidity - exact).abs() <= 1e-10 * exact);
    }
}
