use std::sync::Arc;

use zaremba::fem::Assembly;
use zaremba::shape::{
    dirichlet_normal_derivative, dirichlet_trace, eulerian_derivative, hadamard_tau_prime,
    half_boundary_tau_prime, TraceMethod, VectorField,
};
use zaremba::spectral::solve_on;
use zaremba::sweep::{sweep_point, SweepSettings};
use zaremba::{AnnularDomain, Mesh, ProblemKind, Resolution};

fn coarse() -> Resolution {
    Resolution::new(64, 16, 0.8).unwrap()
}

#[test]
fn derivative_forms_agree_on_one_mesh() {
    let d = AnnularDomain::new(1.0, 5.0, 1.5).unwrap();
    let asm = Assembly::new(Arc::new(Mesh::build(&d, coarse()).unwrap()));
    let u = solve_on(&asm, ProblemKind::ND, 1e-9).unwrap();
    let trace = dirichlet_normal_derivative(&u.field, ProblemKind::ND).unwrap();
    let same = dirichlet_trace(&u.field, u.value, &asm, ProblemKind::ND, TraceMethod::default()).unwrap();
    assert_eq!(hadamard_tau_prime(&same), hadamard_tau_prime(&trace));
    let full = hadamard_tau_prime(&trace);
    let half = half_boundary_tau_prime(&trace, &d).unwrap();
    let eul = eulerian_derivative(&u.field, u.value, &VectorField::translation(u.mesh()), ProblemKind::ND, &trace)
        .unwrap();
    assert!(full < 0.0);
    assert!((full - half).abs() <= 1e-10 * full.abs());
    assert!((full - eul).abs() <= 1e-12 * full.abs());
    let flux_trace = dirichlet_trace(&u.field, u.value, &asm, ProblemKind::ND, TraceMethod::VariationalFlux).unwrap();
    let flux = hadamard_tau_prime(&flux_trace);
    assert!(flux < 0.0 && (flux - full).abs() <= 0.3 * full.abs());
}

#[test]
fn sweep_point_is_consistent_with_direct_solves() {
    let cfg = SweepSettings {
        resolution: coarse(),
        ..SweepSettings::default()
    };
    let r = sweep_point(1.0, 5.0, 2.0, &cfg).unwrap();
    let d = AnnularDomain::new(1.0, 5.0, 2.0).unwrap();
    let asm = Assembly::new(Arc::new(Mesh::build(&d, coarse()).unwrap()));
    for (kind, value) in [(ProblemKind::ND, r.tau1), (ProblemKind::DN, r.nu1), (ProblemKind::DD, r.lambda1)] {
        assert_eq!(solve_on(&asm, kind, cfg.tol).unwrap().value, value);
    }
    assert!(r.tau1 < r.lambda1);
    assert!(r.dtau_hadamard < 0.0 && r.dT_boundary > 0.0);
    assert!((r.T - r.T_energy).abs() <= 1e-10 * r.T);
}
