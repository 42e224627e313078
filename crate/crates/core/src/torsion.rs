//! Torsion function `-lap v = 1` (zero on the inner circle, zero flux on the
//! outer one), torsional rigidity and its derivative in the offset.

use std::sync::Arc;

use crate::eigensolver::solve_spd_attainable;
use crate::error::{Error, Result};
use crate::fem::{Assembly, Field, ProblemKind};
use crate::geometry::AnnularDomain;
use crate::mesh::{Mesh, Resolution};
use crate::shape::BoundaryTrace;

#[derive(Debug, Clone)]
pub struct TorsionSolution {
    pub field: Field,
    /// Relative residual of the linear solve.
    pub residual: f64,
}

impl TorsionSolution {
    pub fn mesh(&self) -> &Arc<Mesh> {
        self.field.mesh()
    }
}

pub fn solve_torsion(domain: &AnnularDomain, resolution: Resolution) -> Result<TorsionSolution> {
    let asm = Assembly::new(Arc::new(Mesh::build(domain, resolution)?));
    solve_torsion_on(&asm)
}

pub fn solve_torsion_on(asm: &Assembly) -> Result<TorsionSolution> {
    let red = asm.reduce(ProblemKind::ND)?;
    let report = solve_spd_attainable(&red.stiffness, &red.load, None, 1e-13)?;
    if report.residual > 1e-9 {
        return Err(Error::NonConvergence {
            iterations: report.iterations,
            residual: report.residual,
        });
    }
    Ok(TorsionSolution {
        field: Field::new(asm.mesh.clone(), red.expand(&report.x))?,
        residual: report.residual,
    })
}

/// Rigidity as Dirichlet energy `v^T K v` and as the integral `b^T v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rigidity {
    pub energy: f64,
    pub integral: f64,
}

pub fn torsional_rigidity(v: &Field, asm: &Assembly) -> Result<Rigidity> {
    if !Arc::ptr_eq(v.mesh(), &asm.mesh) {
        return Err(Error::GeometryMismatch("torsion field and assembly use different meshes".into()));
    }
    let energy = asm.stiffness.quadratic_form(v.values());
    let integral = asm.load.iter().zip(v.values()).map(|(b, x)| b * x).sum();
    Ok(Rigidity { energy, integral })
}

/// `+int_{Gamma_D} |dv/dn|^2 n_1 dS`.
pub fn rigidity_derivative(trace: &BoundaryTrace) -> f64 {
    trace.squared_flux_moment()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_oracle::concentric_torsion;
    use crate::shape::{dirichlet_normal_derivative, finite_difference, torsion_flux_trace};

    #[test]
    fn concentric_matches_closed_form() {
        let d = AnnularDomain::new(1.0, 2.0, 0.0).unwrap();
        let asm = Assembly::new(Arc::new(Mesh::build(&d, Resolution::new(128, 32, 0.8).unwrap()).unwrap()));
        let sol = solve_torsion_on(&asm).unwrap();
        let exact = concentric_torsion(1.0, 2.0);
        let vmax = exact.value(2.0);
        for (k, p) in asm.mesh.vertices().iter().enumerate() {
            let err = (sol.field.value(k) - exact.value(p.norm())).abs();
            assert!(err <= 0.005 * vmax);
        }
        let t = torsional_rigidity(&sol.field, &asm).unwrap();
        assert!((t.energy - t.integral).abs() <= 1e-10 * t.integral);
        assert!((t.integral - exact.rigidity).abs() <= 0.005 * exact.rigidity);
    }

    #[test]
    fn positive_with_derivative_sign() {
        let d = AnnularDomain::new(1.0, 5.0, 2.0).unwrap();
        let res = Resolution::new(64, 16, 0.8).unwrap();
        let sol = solve_torsion(&d, res).unwrap();
        assert!(sol.field.values().iter().all(|&x| x >= 0.0));
        let (vmax, _) = sol.field.max_vertex();
        let p = sol.mesh().vertex(vmax);
        assert!((p.x + 5.0).abs() < 1e-12);
        let tr = dirichlet_normal_derivative(&sol.field, ProblemKind::ND).unwrap();
        assert!(rigidity_derivative(&tr) > 0.0);
        let asm = Assembly::new(sol.mesh().clone());
        let flux = torsion_flux_trace(&sol.field, &asm).unwrap();
        let dt = rigidity_derivative(&flux);
        let fd = finite_difference(&d, 0.05, |dd| {
            let asm = Assembly::new(Arc::new(Mesh::build(dd, res)?));
            let v = solve_torsion_on(&asm)?;
            Ok(torsional_rigidity(&v.field, &asm)?.integral)
        })
        .unwrap();
        assert!((dt - fd).abs() <= 0.02 * fd, "{dt} vs {fd}");
    }
}
