//! P1 assembly of stiffness, mass and load, and Dirichlet elimination.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};

/// Symmetric sparse matrix stored as the CSR lower triangle (diagonal included).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    row_offsets: Vec<usize>,
    columns: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds from `(row, col, value)` contributions; entries above the
    /// diagonal are folded onto their transpose. Duplicates are summed in
    /// input order after a stable sort on `(row, col)`.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        for t in triplets.iter_mut() {
            if t.1 > t.0 {
                std::mem::swap(&mut t.0, &mut t.1);
            }
        }
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_offsets = vec![0usize; dim + 1];
        let mut columns = Vec::with_capacity(triplets.len() / 2);
        let mut values = Vec::with_capacity(triplets.len() / 2);
        let mut k = 0;
        while k < triplets.len() {
            let (r, c, _) = triplets[k];
            let mut sum = 0.0;
            while k < triplets.len() && triplets[k].0 == r && triplets[k].1 == c {
                sum += triplets[k].2;
                k += 1;
            }
            if sum.abs() >= 1e-300 {
                columns.push(c);
                values.push(sum);
                row_offsets[r + 1] += 1;
            }
        }
        for r in 0..dim {
            row_offsets[r + 1] += row_offsets[r];
        }
        SparseSymMatrix {
            dim,
            row_offsets,
            columns,
            values,
        }
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let n = a.len();
        let mut t = Vec::new();
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate().take(i + 1) {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        SparseSymMatrix::from_triplets(n, t)
    }

    pub fn identity(n: usize) -> Self {
        SparseSymMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz_lower(&self) -> usize {
        self.values.len()
    }

    /// Lower-triangle entries `(col, value)` of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        self.columns[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.dim {
            let mut acc = 0.0;
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                let c = self.columns[k];
                let v = self.values[k];
                acc += v * x[c];
                if c != r {
                    y[c] += v * x[r];
                }
            }
            y[r] += acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x^T A x`, evaluated as `sum_i rowsum_i x_i^2 - sum_{i>j} a_ij (x_i - x_j)^2`
    /// so smooth vectors do not suffer cancellation.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut rowsum = vec![0.0; self.dim];
        let mut q = 0.0;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                if c == r {
                    rowsum[r] += v;
                } else {
                    rowsum[r] += v;
                    rowsum[c] += v;
                    let d = x[r] - x[c];
                    q -= v * d * d;
                }
            }
        }
        q + rowsum.iter().zip(x).map(|(s, xi)| s * xi * xi).sum::<f64>()
    }

    /// Sum of all entries of the full symmetric matrix.
    pub fn entry_sum(&self) -> f64 {
        let mut s = 0.0;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                s += if c == r { v } else { 2.0 * v };
            }
        }
        s
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.dim]; self.dim];
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                a[r][c] = v;
                a[c][r] = v;
            }
        }
        a
    }

    /// Principal submatrix on `keep` (indices in increasing order).
    pub fn submatrix(&self, keep: &[usize]) -> SparseSymMatrix {
        let mut map = vec![usize::MAX; self.dim];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut t = Vec::with_capacity(self.values.len());
        for &old_r in keep {
            for (c, v) in self.row(old_r) {
                if map[c] != usize::MAX {
                    t.push((map[old_r], map[c], v));
                }
            }
        }
        SparseSymMatrix::from_triplets(keep.len(), t)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Which boundary component carries the Dirichlet condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemKind {
    /// Dirichlet on the inner circle, Neumann on the outer circle (eigenvalue `tau_1`).
    ND,
    /// Dirichlet on the outer circle, Neumann on the inner circle (eigenvalue `nu_1`).
    DN,
    /// Dirichlet on both circles (eigenvalue `lambda_1`).
    DD,
}

impl ProblemKind {
    pub fn dirichlet_tags(self) -> &'static [BoundaryTag] {
        match self {
            ProblemKind::ND => &[BoundaryTag::DirichletInner],
            ProblemKind::DN => &[BoundaryTag::NeumannOuter],
            ProblemKind::DD => &[BoundaryTag::DirichletInner, BoundaryTag::NeumannOuter],
        }
    }

    pub fn is_dirichlet(self, tag: BoundaryTag) -> bool {
        self.dirichlet_tags().contains(&tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::ND => "nd",
            ProblemKind::DN => "dn",
            ProblemKind::DD => "dd",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nd" => Ok(ProblemKind::ND),
            "dn" => Ok(ProblemKind::DN),
            "dd" => Ok(ProblemKind::DD),
            other => Err(Error::InvalidParameter(format!(
                "unknown problem kind '{other}' (expected nd, dn or dd)"
            ))),
        }
    }
}

/// Per-vertex values of a P1 function on a mesh.
#[derive(Debug, Clone)]
pub struct Field {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.vertex_count() {
            return Err(Error::Contract(format!(
                "field has {} values for {} vertices",
                values.len(),
                mesh.vertex_count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite field value at vertex {k}")));
        }
        Ok(Field { mesh, values })
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(crate::geometry::Point) -> f64) -> Self {
        let values = mesh.vertices().iter().map(|&p| f(p)).collect();
        Field { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, v: usize) -> f64 {
        self.values[v]
    }

    pub fn interpolate(&self, p: crate::geometry::Point) -> Result<f64> {
        self.mesh.interpolate(&self.values, p)
    }

    pub fn max_vertex(&self) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (k, &v) in self.values.iter().enumerate() {
            if v > best.1 {
                best = (k, v);
            }
        }
        best
    }
}

/// Element stiffness matrix of a P1 triangle.
pub fn element_stiffness(area: f64, grads: &[crate::geometry::Point; 3]) -> [[f64; 3]; 3] {
    let mut k = [[0.0; 3]; 3];
    for (a, ga) in grads.iter().enumerate() {
        for (b, gb) in grads.iter().enumerate() {
            k[a][b] = area * ga.dot(*gb);
        }
    }
    k
}

/// Consistent P1 element mass matrix `area / 12 * [[2,1,1],[1,2,1],[1,1,2]]`.
pub fn element_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

fn assemble_with(mesh: &Mesh, local: impl Fn(usize) -> [[f64; 3]; 3]) -> SparseSymMatrix {
    let mut t = Vec::with_capacity(mesh.triangles().len() * 6);
    for (e, tri) in mesh.triangles().iter().enumerate() {
        let k = local(e);
        for a in 0..3 {
            for b in 0..=a {
                t.push((tri[a], tri[b], k[a][b]));
            }
        }
    }
    SparseSymMatrix::from_triplets(mesh.vertex_count(), t)
}

pub fn assemble_stiffness(mesh: &Mesh) -> SparseSymMatrix {
    assemble_with(mesh, |e| {
        let (area, g) = mesh.triangle_gradients(e);
        element_stiffness(area, &g)
    })
}

pub fn assemble_mass(mesh: &Mesh) -> SparseSymMatrix {
    assemble_with(mesh, |e| element_mass(mesh.triangle_area(e)))
}

/// `b_i = integral of phi_i`, one third of the adjacent triangle area.
pub fn assemble_load(mesh: &Mesh) -> Vec<f64> {
    let mut b = vec![0.0; mesh.vertex_count()];
    for (e, tri) in mesh.triangles().iter().enumerate() {
        let third = mesh.triangle_area(e) / 3.0;
        for &v in tri {
            b[v] += third;
        }
    }
    b
}

/// Stiffness, mass and load assembled once on a mesh.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub mesh: Arc<Mesh>,
    pub stiffness: SparseSymMatrix,
    pub mass: SparseSymMatrix,
    pub load: Vec<f64>,
}

impl Assembly {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let stiffness = assemble_stiffness(&mesh);
        let mass = assemble_mass(&mesh);
        let load = assemble_load(&mesh);
        Assembly {
            mesh,
            stiffness,
            mass,
            load,
        }
    }

    pub fn reduce(&self, kind: ProblemKind) -> Result<ReducedSystem> {
        reduce_system(&self.stiffness, &self.mass, &self.load, &self.mesh, kind)
    }
}

/// System restricted to the free (non-Dirichlet) vertices.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub kind: ProblemKind,
    pub stiffness: SparseSymMatrix,
    pub mass: SparseSymMatrix,
    pub load: Vec<f64>,
    /// Reduced index -> full vertex index.
    pub free: Vec<usize>,
    pub full_dim: usize,
}

impl ReducedSystem {
    /// Full-length vector with zeros on constrained vertices.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.full_dim];
        for (k, &v) in self.free.iter().enumerate() {
            full[v] = reduced[k];
        }
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&v| full[v]).collect()
    }

    pub fn constrained_count(&self) -> usize {
        self.full_dim - self.free.len()
    }
}

pub fn reduce_system(
    stiffness: &SparseSymMatrix,
    mass: &SparseSymMatrix,
    load: &[f64],
    mesh: &Mesh,
    kind: ProblemKind,
) -> Result<ReducedSystem> {
    if kind.dirichlet_tags().is_empty() {
        return Err(Error::InvalidParameter(
            "pure Neumann problems are singular and not supported".into(),
        ));
    }
    let constrained: Vec<bool> = (0..mesh.vertex_count())
        .map(|v| kind.dirichlet_tags().iter().any(|&t| mesh.is_on_tag(v, t)))
        .collect();
    let free: Vec<usize> = (0..mesh.vertex_count()).filter(|&v| !constrained[v]).collect();
    if free.len() == mesh.vertex_count() {
        return Err(Error::InvalidParameter("empty Dirichlet set".into()));
    }
    Ok(ReducedSystem {
        kind,
        stiffness: stiffness.submatrix(&free),
        mass: mass.submatrix(&free),
        load: free.iter().map(|&v| load[v]).collect(),
        free,
        full_dim: mesh.vertex_count(),
    })
}
