//! Shape derivative of the first mixed eigenvalue under translation of the hole.

use std::sync::Arc;

use crate::checks::{recover_gradient, GradientField};
use crate::eigensolver::solve_spd;
use crate::error::{Error, Result};
use crate::fem::{Assembly, Field, ProblemKind, SparseSymMatrix};
use crate::geometry::{AnnularDomain, Point};
use crate::mesh::{BoundaryEdge, BoundaryTag, Mesh, Resolution};
use crate::spectral::solve_on;

/// How the normal derivative on the Dirichlet circle is extracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceMethod {
    /// Constant P1 gradient of the triangle adjacent to each edge.
    #[default]
    ElementGradient,
    /// Boundary flux from the discrete residual `K u - tau M u` on the
    /// constrained rows, projected with the boundary mass matrix.
    VariationalFlux,
}

#[derive(Debug, Clone, Copy)]
pub struct TraceEdge {
    /// Index into [`Mesh::boundary_edges`].
    pub edge: usize,
    /// Point of the circle on the edge's perpendicular bisector.
    pub midpoint: Point,
    /// Unit normal, outward to the annulus.
    pub normal: Point,
    pub length: f64,
    pub dudn: f64,
    /// Tangential gradient component (zero up to rounding for element traces).
    pub tangential: f64,
}

/// Normal derivative on the edges of one boundary circle.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    pub tag: BoundaryTag,
    pub edges: Vec<TraceEdge>,
}

impl BoundaryTrace {
    pub fn max_dudn(&self) -> f64 {
        self.edges.iter().map(|e| e.dudn).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `int |du/dn|^2 n_1 dS` in edge order.
    pub fn squared_flux_moment(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| e.dudn * e.dudn * e.normal.x * e.length)
            .sum()
    }
}

/// Geometry of a boundary edge: circle point, outward normal, chord length.
pub fn edge_geometry(mesh: &Mesh, edge: &BoundaryEdge) -> (Point, Point, f64) {
    let a = mesh.vertex(edge.vertices[0]);
    let b = mesh.vertex(edge.vertices[1]);
    let chord_mid = 0.5 * (a + b);
    let d = mesh.domain();
    match edge.tag {
        BoundaryTag::DirichletInner => {
            let c = d.inner_center();
            let out = c - chord_mid;
            let n = (1.0 / out.norm()) * out;
            (c - d.r0() * n, n, a.distance(b))
        }
        BoundaryTag::NeumannOuter => {
            let n = (1.0 / chord_mid.norm()) * chord_mid;
            (d.r1() * n, n, a.distance(b))
        }
    }
}

fn dirichlet_tag(kind: ProblemKind) -> Result<BoundaryTag> {
    match kind {
        ProblemKind::ND | ProblemKind::DD => Ok(BoundaryTag::DirichletInner),
        ProblemKind::DN => Ok(BoundaryTag::NeumannOuter),
    }
}

fn check_zero_trace(u: &Field, tag: BoundaryTag) -> Result<()> {
    let mesh = u.mesh();
    let scale = u.values().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for e in mesh.edges_with_tag(tag) {
        for &v in &e.vertices {
            if u.value(v).abs() > 1e-12 * scale {
                return Err(Error::Contract(format!(
                    "field is {} on Dirichlet vertex {v}",
                    u.value(v)
                )));
            }
        }
    }
    Ok(())
}

/// Element-gradient trace on the inner Dirichlet circle (for `DN`, the outer one).
pub fn dirichlet_normal_derivative(u: &Field, kind: ProblemKind) -> Result<BoundaryTrace> {
    let tag = dirichlet_tag(kind)?;
    check_zero_trace(u, tag)?;
    let mesh = u.mesh();
    let mut edges = Vec::new();
    for (k, e) in mesh.boundary_edges().iter().enumerate() {
        if e.tag != tag {
            continue;
        }
        let (mid, n, len) = edge_geometry(mesh, e);
        let (_, g) = mesh.triangle_gradients(e.triangle);
        let tri = mesh.triangles()[e.triangle];
        let grad = (0..3).fold(Point::ORIGIN, |acc, a| acc + u.value(tri[a]) * g[a]);
        let t = Point::new(-n.y, n.x);
        edges.push(TraceEdge {
            edge: k,
            midpoint: mid,
            normal: n,
            length: len,
            dudn: grad.dot(n),
            tangential: grad.dot(t),
        });
    }
    Ok(BoundaryTrace { tag, edges })
}

/// Trace of an eigenfunction `u` with eigenvalue `tau` by the chosen method.
pub fn dirichlet_trace(
    u: &Field,
    tau: f64,
    asm: &Assembly,
    kind: ProblemKind,
    method: TraceMethod,
) -> Result<BoundaryTrace> {
    if !Arc::ptr_eq(u.mesh(), &asm.mesh) {
        return Err(Error::GeometryMismatch("field and assembly use different meshes".into()));
    }
    match method {
        TraceMethod::ElementGradient => dirichlet_normal_derivative(u, kind),
        TraceMethod::VariationalFlux => dirichlet_flux_trace(u, tau, asm, kind),
    }
}

/// Residual-based trace: `r = K u - tau M u` on constrained vertices equals
/// `int du/dn phi_i dS`; solving with the boundary mass matrix gives nodal
/// fluxes, averaged to edge midpoints.
pub fn dirichlet_flux_trace(
    u: &Field,
    tau: f64,
    asm: &Assembly,
    kind: ProblemKind,
) -> Result<BoundaryTrace> {
    let tag = dirichlet_tag(kind)?;
    check_zero_trace(u, tag)?;
    let mesh = u.mesh();
    let ku = asm.stiffness.mul_vec(u.values());
    let mu = asm.mass.mul_vec(u.values());
    let residual: Vec<f64> = ku.iter().zip(&mu).map(|(a, b)| a - tau * b).collect();
    flux_from_residual(mesh, tag, &residual)
}

/// Residual-based trace for the torsion problem, from `K v - b`.
pub fn torsion_flux_trace(v: &Field, asm: &Assembly) -> Result<BoundaryTrace> {
    check_zero_trace(v, BoundaryTag::DirichletInner)?;
    let kv = asm.stiffness.mul_vec(v.values());
    let residual: Vec<f64> = kv.iter().zip(&asm.load).map(|(a, b)| a - b).collect();
    flux_from_residual(v.mesh(), BoundaryTag::DirichletInner, &residual)
}

fn flux_from_residual(mesh: &Arc<Mesh>, tag: BoundaryTag, residual: &[f64]) -> Result<BoundaryTrace> {
    let ring: Vec<&BoundaryEdge> = mesh.edges_with_tag(tag).collect();
    let n = ring.len();
    // ring vertex k is the first vertex of ring edge k
    let index_of = |v: usize| mesh.lattice_coords(v).0;
    let mut trip = Vec::with_capacity(3 * n);
    for e in &ring {
        let len = mesh.vertex(e.vertices[0]).distance(mesh.vertex(e.vertices[1]));
        let (a, b) = (index_of(e.vertices[0]), index_of(e.vertices[1]));
        trip.push((a, a, len / 3.0));
        trip.push((b, b, len / 3.0));
        trip.push((a, b, len / 6.0));
    }
    let mb = SparseSymMatrix::from_triplets(n, trip);
    let mut rhs = vec![0.0; n];
    for e in &ring {
        rhs[index_of(e.vertices[0])] = residual[e.vertices[0]];
    }
    let g = solve_spd(&mb, &rhs, 1e-14)?;
    let mut edges = Vec::with_capacity(n);
    for (k, e) in mesh.boundary_edges().iter().enumerate() {
        if e.tag != tag {
            continue;
        }
        let (mid, nrm, len) = edge_geometry(mesh, e);
        let dudn = 0.5 * (g[index_of(e.vertices[0])] + g[index_of(e.vertices[1])]);
        edges.push(TraceEdge {
            edge: k,
            midpoint: mid,
            normal: nrm,
            length: len,
            dudn,
            tangential: 0.0,
        });
    }
    Ok(BoundaryTrace { tag, edges })
}

/// `-int_{Gamma_D} |du/dn|^2 n_1 dS`.
pub fn hadamard_tau_prime(trace: &BoundaryTrace) -> f64 {
    -trace.squared_flux_moment()
}

/// Same sum regrouped over the half circle `x_1 > s`, each edge paired with its
/// mirror under `x_1 -> 2s - x_1`.
pub fn half_boundary_tau_prime(trace: &BoundaryTrace, domain: &AnnularDomain) -> Result<f64> {
    let n = trace.edges.len();
    if n % 2 != 0 {
        return Err(Error::Symmetry(format!("odd number of trace edges {n}")));
    }
    let s = domain.s();
    let half = n / 2;
    let mut total = 0.0;
    let mut paired = 0;
    for (k, e) in trace.edges.iter().enumerate() {
        if e.midpoint.x <= s {
            continue;
        }
        // edge (k, k+1) maps to (half-k-1, half-k)
        let m = (half + n - 1 - k) % n;
        let mirror = &trace.edges[m];
        let reflected = Point::new(2.0 * s - e.midpoint.x, e.midpoint.y);
        if mirror.midpoint.distance(reflected) > 1e-9 * domain.r1() {
            return Err(Error::Symmetry(format!(
                "trace edge {k} has no mirror partner (candidate {m})"
            )));
        }
        total += (mirror.dudn * mirror.dudn - e.dudn * e.dudn) * e.normal.x * e.length;
        paired += 1;
    }
    if 2 * paired != n {
        return Err(Error::Symmetry(format!("{paired} pairs for {n} edges")));
    }
    Ok(total)
}

/// Perturbation field with its normal component on every boundary edge.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub vertex: Vec<Point>,
    /// `V . n` per entry of [`Mesh::boundary_edges`].
    pub edge_normal: Vec<f64>,
}

impl VectorField {
    pub fn zero(mesh: &Mesh) -> Self {
        VectorField {
            vertex: vec![Point::ORIGIN; mesh.vertex_count()],
            edge_normal: vec![0.0; mesh.boundary_edges().len()],
        }
    }

    /// `V = rho e_1` with `rho = 1` on the inner half of the layers and
    /// decreasing linearly to zero on the outer circle.
    pub fn translation(mesh: &Mesh) -> Self {
        let n_rad = mesh.n_rad();
        let vertex = (0..mesh.vertex_count())
            .map(|v| {
                let (_, j) = mesh.lattice_coords(v);
                let rho = if 2 * j <= n_rad {
                    1.0
                } else {
                    2.0 * (n_rad - j) as f64 / n_rad as f64
                };
                Point::new(rho, 0.0)
            })
            .collect();
        let edge_normal = mesh
            .boundary_edges()
            .iter()
            .map(|e| match e.tag {
                BoundaryTag::DirichletInner => edge_geometry(mesh, e).1.x,
                BoundaryTag::NeumannOuter => 0.0,
            })
            .collect();
        VectorField { vertex, edge_normal }
    }

    /// Dilation `V(x) = x`.
    pub fn dilation(mesh: &Mesh) -> Self {
        Self::from_fn(mesh, |p| p)
    }

    /// Samples `f` at vertices and at the boundary circle points.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(Point) -> Point) -> Self {
        let vertex = mesh.vertices().iter().map(|&p| f(p)).collect();
        let edge_normal = mesh
            .boundary_edges()
            .iter()
            .map(|e| {
                let (mid, n, _) = edge_geometry(mesh, e);
                f(mid).dot(n)
            })
            .collect();
        VectorField { vertex, edge_normal }
    }
}

/// `int_{Gamma_N} (|grad u|^2 - tau u^2) V.n dS - int_{Gamma_D} (du/dn)^2 V.n dS`.
pub fn eulerian_derivative(
    u: &Field,
    tau: f64,
    v: &VectorField,
    kind: ProblemKind,
    trace: &BoundaryTrace,
) -> Result<f64> {
    let mesh = u.mesh();
    if v.edge_normal.len() != mesh.boundary_edges().len() {
        return Err(Error::GeometryMismatch("vector field built on another mesh".into()));
    }
    let dtag = dirichlet_tag(kind)?;
    if trace.tag != dtag {
        return Err(Error::Contract("trace taken on the wrong boundary".into()));
    }
    let grad = recover_gradient(u);
    let mut neumann = 0.0;
    if kind != ProblemKind::DD {
        for (k, e) in mesh.boundary_edges().iter().enumerate() {
            if e.tag == dtag || v.edge_normal[k] == 0.0 {
                continue;
            }
            let (_, _, len) = edge_geometry(mesh, e);
            let [a, b] = e.vertices;
            let g = 0.5 * (grad.at(a) + grad.at(b));
            let um = 0.5 * (u.value(a) + u.value(b));
            neumann += (g.dot(g) - tau * um * um) * v.edge_normal[k] * len;
        }
    }
    let mut dirichlet = 0.0;
    for e in &trace.edges {
        dirichlet += e.dudn * e.dudn * v.edge_normal[e.edge] * e.length;
    }
    Ok(neumann - dirichlet)
}

/// Central difference `(tau(s + h) - tau(s - h)) / 2h`, one-sided at `s = 0`.
pub fn finite_difference_tau_prime(
    domain: &AnnularDomain,
    h: f64,
    resolution: Resolution,
    tol: f64,
) -> Result<f64> {
    finite_difference(domain, h, |d| {
        let asm = Assembly::new(Arc::new(Mesh::build(d, resolution)?));
        Ok(solve_on(&asm, ProblemKind::ND, tol)?.value)
    })
}

/// Difference quotient of any functional of the offset.
pub fn finite_difference(
    domain: &AnnularDomain,
    h: f64,
    functional: impl Fn(&AnnularDomain) -> Result<f64>,
) -> Result<f64> {
    let s = domain.s();
    let gap = domain.r1() - domain.r0();
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    if s == 0.0 {
        if h > gap / 4.0 {
            return Err(Error::InvalidDomain(format!("step {h} too large for gap {gap}")));
        }
        let a = functional(domain)?;
        let b = functional(&domain.with_offset(h)?)?;
        return Ok((b - a) / h);
    }
    if h > s.min(gap - s) / 4.0 {
        return Err(Error::InvalidDomain(format!(
            "step {h} exceeds min(s, R1 - R0 - s) / 4 at s = {s}"
        )));
    }
    let plus = functional(&domain.with_offset(s + h)?)?;
    let minus = functional(&domain.with_offset(s - h)?)?;
    Ok((plus - minus) / (2.0 * h))
}

/// Reflected Neumann derivative `grad u(sigma_s x) . sigma_0 n(x)` at outer
/// boundary vertices with `x_1 > s` outside balls of radius `exclusion`
/// around `(+-R1, 0)`. `sigma_0` flips the first coordinate.
pub fn reflected_neumann_derivative(
    u: &Field,
    grad: &GradientField,
    exclusion: f64,
) -> Result<Vec<(Point, f64)>> {
    let mesh = u.mesh();
    let d = mesh.domain();
    let s = d.s();
    let mut out = Vec::new();
    for v in 0..mesh.vertex_count() {
        if !mesh.is_on_tag(v, BoundaryTag::NeumannOuter) {
            continue;
        }
        let x = mesh.vertex(v);
        if x.x <= s
            || x.distance(Point::new(d.r1(), 0.0)) < exclusion
            || x.distance(Point::new(-d.r1(), 0.0)) < exclusion
        {
            continue;
        }
        let n = (1.0 / x.norm()) * x;
        let reflected = Point::new(2.0 * s - x.x, x.y);
        let g = grad.interpolate(reflected)?;
        out.push((x, g.dot(Point::new(-n.x, n.y))));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::solve_eigenproblem;

    fn res() -> Resolution {
        Resolution::new(64, 16, 0.8).unwrap()
    }

    #[test]
    fn distance_ramp_has_unit_inward_slope() {
        let d = AnnularDomain::new(1.0, 5.0, 2.0).unwrap();
        let mesh = Arc::new(Mesh::build(&d, Resolution::new(128, 32, 1.0).unwrap()).unwrap());
        let c = d.inner_center();
        let mut u = Field::from_fn(mesh.clone(), |p| p.distance(c) - 1.0);
        for e in mesh.clone().edges_with_tag(BoundaryTag::DirichletInner) {
            for &v in &e.vertices {
                assert!(u.value(v).abs() < 1e-14);
            }
        }
        let vals: Vec<f64> = u.values().iter().map(|&x| if x.abs() < 1e-14 { 0.0 } else { x }).collect();
        u = Field::new(mesh, vals).unwrap();
        let tr = dirichlet_normal_derivative(&u, ProblemKind::ND).unwrap();
        for e in &tr.edges {
            assert!((e.dudn + 1.0).abs() < 0.01);
            assert!((e.normal.norm() - 1.0).abs() < 1e-14);
            let n = (1.0 / d.r0()) * (c - e.midpoint);
            assert!(n.distance(e.normal) < 1e-10);
        }
    }

    #[test]
    fn nonzero_trace_rejected() {
        let d = AnnularDomain::new(1.0, 5.0, 1.0).unwrap();
        let mesh = Arc::new(Mesh::build(&d, res()).unwrap());
        let u = Field::from_fn(mesh, |_| 1.0);
        assert!(dirichlet_normal_derivative(&u, ProblemKind::ND).is_err());
    }

    #[test]
    fn concentric_trace_is_uniform_and_negative() {
        let d = AnnularDomain::new(1.0, 5.0, 0.0).unwrap();
        let ef = solve_eigenproblem(&d, Resolution::new(128, 32, 0.8).unwrap(), ProblemKind::ND, 1e-9).unwrap();
        let tr = dirichlet_normal_derivative(&ef.field, ProblemKind::ND).unwrap();
        let mean = tr.edges.iter().map(|e| e.dudn).sum::<f64>() / tr.edges.len() as f64;
        for e in &tr.edges {
            assert!(e.dudn < 0.0);
            assert!((e.dudn - mean).abs() <= 0.005 * mean.abs());
        }
        let dt = hadamard_tau_prime(&tr);
        assert!(dt.abs() <= 1e-3 * ef.value / 5.0);
        let half = half_boundary_tau_prime(&tr, &d).unwrap();
        assert!(half.abs() <= 1e-3 * ef.value / 5.0);
    }

    #[test]
    fn half_boundary_regrouping_is_exact() {
        let d = AnnularDomain::new(1.0, 5.0, 2.0).unwrap();
        let ef = solve_eigenproblem(&d, res(), ProblemKind::ND, 1e-9).unwrap();
        for tr in [
            dirichlet_normal_derivative(&ef.field, ProblemKind::ND).unwrap(),
            dirichlet_flux_trace(&ef.field, ef.value, &Assembly::new(ef.mesh().clone()), ProblemKind::ND).unwrap(),
        ] {
            let full = hadamard_tau_prime(&tr);
            let half = half_boundary_tau_prime(&tr, &d).unwrap();
            assert!(full < 0.0);
            assert!((full - half).abs() <= 1e-10 * full.abs());
            // each mirror pair: the far side carries the larger flux
            for e in tr.edges.iter().filter(|e| e.midpoint.x > 2.0) {
                let m = tr
                    .edges
                    .iter()
                    .find(|o| o.midpoint.distance(Point::new(4.0 - e.midpoint.x, e.midpoint.y)) < 1e-9)
                    .unwrap();
                assert!(m.dudn < e.dudn && e.dudn < 0.0);
            }
        }
    }

    #[test]
    fn translation_field_reproduces_hadamard() {
        let d = AnnularDomain::new(1.0, 5.0, 1.2).unwrap();
        let ef = solve_eigenproblem(&d, res(), ProblemKind::ND, 1e-9).unwrap();
        let tr = dirichlet_normal_derivative(&ef.field, ProblemKind::ND).unwrap();
        let v = VectorField::translation(ef.mesh());
        let e = eulerian_derivative(&ef.field, ef.value, &v, ProblemKind::ND, &tr).unwrap();
        let h = hadamard_tau_prime(&tr);
        assert!((e - h).abs() <= 1e-12 * h.abs());
        let z = VectorField::zero(ef.mesh());
        assert_eq!(eulerian_derivative(&ef.field, ef.value, &z, ProblemKind::ND, &tr).unwrap(), 0.0);
    }

    #[test]
    fn step_validation() {
        let d = AnnularDomain::new(1.0, 5.0, 0.4).unwrap();
        assert!(finite_difference(&d, 0.2, |_| Ok(0.0)).is_err());
        assert!(finite_difference(&d, 0.05, |x| Ok(x.s() * x.s())).is_ok());
    }
}
