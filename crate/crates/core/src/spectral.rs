//! First eigenpair of the annulus for a given boundary configuration.

use std::sync::Arc;

use crate::eigensolver::{smallest_eigenpair, EigenPair};
use crate::error::Result;
use crate::fem::{Assembly, Field, ProblemKind};
use crate::geometry::AnnularDomain;
use crate::mesh::{Mesh, Resolution};

#[derive(Debug, Clone)]
pub struct Eigenfunction {
    pub kind: ProblemKind,
    pub value: f64,
    /// M-normalized, positive first eigenfunction (zero on the Dirichlet set).
    pub field: Field,
    pub residual: f64,
    pub outer_iterations: usize,
}

impl Eigenfunction {
    pub fn mesh(&self) -> &Arc<Mesh> {
        self.field.mesh()
    }
}

pub fn solve_eigenproblem(
    domain: &AnnularDomain,
    resolution: Resolution,
    kind: ProblemKind,
    tol: f64,
) -> Result<Eigenfunction> {
    let mesh = Arc::new(Mesh::build(domain, resolution)?);
    let asm = Assembly::new(mesh);
    solve_on(&asm, kind, tol)
}

/// Solves on an existing assembly so several kinds can share one mesh.
pub fn solve_on(asm: &Assembly, kind: ProblemKind, tol: f64) -> Result<Eigenfunction> {
    let red = asm.reduce(kind)?;
    let EigenPair {
        value,
        vector,
        residual,
        history,
        ..
    } = smallest_eigenpair(&red.stiffness, &red.mass, tol)?;
    let field = Field::new(asm.mesh.clone(), red.expand(&vector))?;
    Ok(Eigenfunction {
        kind,
        value,
        field,
        residual,
        outer_iterations: history.len() - 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_oracle::concentric_eigenvalue;

    fn coarse() -> Resolution {
        Resolution::new(64, 16, 0.8).unwrap()
    }

    #[test]
    fn concentric_modes_near_oracle() {
        let d = AnnularDomain::new(1.0, 2.0, 0.0).unwrap();
        let mesh = Arc::new(Mesh::build(&d, Resolution::new(128, 32, 0.8).unwrap()).unwrap());
        let asm = Assembly::new(mesh);
        for kind in [ProblemKind::ND, ProblemKind::DN, ProblemKind::DD] {
            let ef = solve_on(&asm, kind, 1e-9).unwrap();
            let oracle = concentric_eigenvalue(kind, 1.0, 2.0, 400);
            assert!((ef.value - oracle).abs() / oracle < 0.01, "{kind:?}: {} vs {oracle}", ef.value);
        }
    }

    #[test]
    fn positive_and_normalized() {
        let d = AnnularDomain::new(1.0, 5.0, 3.0).unwrap();
        let ef = solve_eigenproblem(&d, coarse(), ProblemKind::ND, 1e-9).unwrap();
        assert!(ef.field.values().iter().all(|&v| v >= -1e-10));
        let asm = Assembly::new(ef.mesh().clone());
        let u = ef.field.values();
        assert!((asm.mass.quadratic_form(u) - 1.0).abs() < 1e-12);
        let rq = asm.stiffness.quadratic_form(u) / asm.mass.quadratic_form(u);
        assert!((rq - ef.value).abs() <= 1e-12 * ef.value);
    }

    #[test]
    fn peak_at_far_outer_point() {
        let d = AnnularDomain::new(1.0, 5.0, 3.0).unwrap();
        let ef = solve_eigenproblem(&d, coarse(), ProblemKind::ND, 1e-9).unwrap();
        let (v, _) = ef.field.max_vertex();
        let p = ef.mesh().vertex(v);
        assert!((p.x + 5.0).abs() < 1e-12 && p.y.abs() < 1e-12);
    }

    #[test]
    fn mixed_below_dirichlet_on_shared_mesh() {
        for s in [0.0, 1.5, 3.5] {
            let d = AnnularDomain::new(1.0, 5.0, s).unwrap();
            let asm = Assembly::new(Arc::new(Mesh::build(&d, coarse()).unwrap()));
            let tau = solve_on(&asm, ProblemKind::ND, 1e-9).unwrap().value;
            let lam = solve_on(&asm, ProblemKind::DD, 1e-9).unwrap().value;
            assert!(tau < lam);
        }
    }

    #[test]
    fn mirror_symmetric_eigenfunction() {
        let d = AnnularDomain::new(1.0, 5.0, 2.0).unwrap();
        let ef = solve_eigenproblem(&d, coarse(), ProblemKind::ND, 1e-9).unwrap();
        let mesh = ef.mesh();
        let u = ef.field.values();
        let umax = ef.field.max_vertex().1;
        for v in 0..mesh.vertex_count() {
            let w = mesh.mirror_vertex(v);
            assert!((u[v] - u[w]).abs() <= 1e-10 * umax);
        }
    }
}
