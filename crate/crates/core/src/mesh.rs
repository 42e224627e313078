//! Structured triangulation of `Omega_s` along rays from the inner center.
//!
//! Lattice vertex `(i, j)` sits on the ray of angle `phi_i = 2 pi i / n_theta`
//! issued from `s e1`, at layer `j` between the inner circle (`j = 0`) and the
//! outer circle (`j = n_rad`). Because every ray is normal to the inner circle,
//! the first layer of triangles is aligned with `Gamma_D`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnnularDomain, Point};

/// Lattice resolution and radial grading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub n_theta: usize,
    pub n_rad: usize,
    pub grading: f64,
}

impl Resolution {
    pub const BASELINE: Resolution = Resolution {
        n_theta: 256,
        n_rad: 64,
        grading: 0.8,
    };

    pub fn new(n_theta: usize, n_rad: usize, grading: f64) -> Result<Self> {
        let r = Resolution {
            n_theta,
            n_rad,
            grading,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_theta < 16 || self.n_theta % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "n_theta must be even and >= 16 (got {})",
                self.n_theta
            )));
        }
        if self.n_rad < 4 {
            return Err(Error::InvalidParameter(format!(
                "n_rad must be >= 4 (got {})",
                self.n_rad
            )));
        }
        if !(0.5..=2.0).contains(&self.grading) {
            return Err(Error::InvalidParameter(format!(
                "grading must lie in [0.5, 2] (got {})",
                self.grading
            )));
        }
        Ok(())
    }

    /// Both lattice counts doubled, same grading.
    pub fn refined(&self) -> Resolution {
        Resolution {
            n_theta: 2 * self.n_theta,
            n_rad: 2 * self.n_rad,
            grading: self.grading,
        }
    }

    /// Normalized layer position `t_j = (j / n_rad)^(1 / grading)`.
    ///
    /// A grading below one clusters layers toward the inner circle.
    pub fn layer_fraction(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else if j == self.n_rad {
            1.0
        } else {
            (j as f64 / self.n_rad as f64).powf(1.0 / self.grading)
        }
    }

    /// Continuous inverse of [`layer_fraction`](Self::layer_fraction).
    fn layer_coordinate(&self, t: f64) -> f64 {
        self.n_rad as f64 * t.max(0.0).powf(self.grading)
    }
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution::BASELINE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    DirichletInner,
    NeumannOuter,
}

/// Boundary edge between lattice angles `i` and `i + 1` of the inner or outer layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
    /// Adjacent triangle.
    pub triangle: usize,
}

/// Result of a point location query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub triangle: usize,
    pub barycentric: [f64; 3],
    /// False when the point lies outside the polygonal mesh and the
    /// barycentric coordinates extrapolate from the closest triangle.
    pub inside: bool,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    domain: AnnularDomain,
    resolution: Resolution,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    directions: Vec<Point>,
    ray_lengths: Vec<f64>,
}

/// Unit directions `(cos phi_i, sin phi_i)` with the reflections `phi -> -phi`
/// and `phi -> pi - phi` holding bit for bit.
fn ray_directions(n_theta: usize) -> Vec<Point> {
    let mut dirs = vec![Point::ORIGIN; n_theta];
    let half = n_theta / 2;
    let step = 2.0 * PI / n_theta as f64;
    // first quadrant: 4 i <= n_theta
    let mut i = 0;
    while 4 * i <= n_theta {
        let d = if 4 * i == n_theta {
            Point::new(0.0, 1.0)
        } else if i == 0 {
            Point::new(1.0, 0.0)
        } else {
            let a = step * i as f64;
            Point::new(a.cos(), a.sin())
        };
        dirs[i] = d;
        dirs[half - i] = Point::new(-d.x, d.y);
        i += 1;
    }
    for i in 1..half {
        dirs[n_theta - i] = dirs[i].mirror_x2();
    }
    dirs[half] = Point::new(-1.0, 0.0);
    dirs
}

fn triangle_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * (b - a).cross(c - a)
}

impl Mesh {
    pub fn build(domain: &AnnularDomain, resolution: Resolution) -> Result<Mesh> {
        resolution.validate()?;
        let n_theta = resolution.n_theta;
        let n_rad = resolution.n_rad;
        let r0 = domain.r0();
        let center = domain.inner_center();

        let directions = ray_directions(n_theta);
        let ray_lengths: Vec<f64> = directions
            .iter()
            .map(|d| domain.ray_exit_along(d.x, d.y))
            .collect();
        let fractions: Vec<f64> = (0..=n_rad).map(|j| resolution.layer_fraction(j)).collect();

        let mut vertices = vec![Point::ORIGIN; n_theta * (n_rad + 1)];
        for j in 0..=n_rad {
            for i in 0..n_theta {
                let d = directions[i];
                let rho = if j == n_rad {
                    ray_lengths[i]
                } else {
                    r0 + fractions[j] * (ray_lengths[i] - r0)
                };
                vertices[j * n_theta + i] = center + rho * d;
            }
        }

        let mut mesh = Mesh {
            domain: *domain,
            resolution,
            vertices,
            triangles: Vec::with_capacity(2 * n_theta * n_rad),
            boundary_edges: Vec::with_capacity(2 * n_theta),
            directions,
            ray_lengths,
        };

        let half = n_theta / 2;
        // Diagonal choice per quad: true = (i, j)-(i+1, j+1), false = (i+1, j)-(i, j+1).
        let mut main_diagonal = vec![false; n_theta * n_rad];
        for i in 0..half {
            for j in 0..n_rad {
                main_diagonal[i * n_rad + j] = mesh.upper_quad_split(i, j);
            }
        }
        for i in half..n_theta {
            let mirror = n_theta - 1 - i;
            for j in 0..n_rad {
                main_diagonal[i * n_rad + j] = !main_diagonal[mirror * n_rad + j];
            }
        }

        for i in 0..n_theta {
            let ip = (i + 1) % n_theta;
            for j in 0..n_rad {
                let a = mesh.lattice_index(i, j);
                let b = mesh.lattice_index(ip, j);
                let c = mesh.lattice_index(ip, j + 1);
                let d = mesh.lattice_index(i, j + 1);
                if main_diagonal[i * n_rad + j] {
                    mesh.triangles.push([a, c, b]);
                    mesh.triangles.push([a, d, c]);
                } else {
                    mesh.triangles.push([a, d, b]);
                    mesh.triangles.push([b, d, c]);
                }
            }
        }

        for (t, tri) in mesh.triangles.iter().enumerate() {
            let area = triangle_area(
                mesh.vertices[tri[0]],
                mesh.vertices[tri[1]],
                mesh.vertices[tri[2]],
            );
            if !(area > 0.0) {
                return Err(Error::MeshQuality { cell: t, area });
            }
        }

        for i in 0..n_theta {
            let ip = (i + 1) % n_theta;
            let inner = mesh.quad_triangles(i, 0);
            let tri = if mesh.triangle_has_edge(inner[0], mesh.lattice_index(i, 0), mesh.lattice_index(ip, 0)) {
                inner[0]
            } else {
                inner[1]
            };
            mesh.boundary_edges.push(BoundaryEdge {
                vertices: [mesh.lattice_index(i, 0), mesh.lattice_index(ip, 0)],
                tag: BoundaryTag::DirichletInner,
                triangle: tri,
            });
        }
        for i in 0..n_theta {
            let ip = (i + 1) % n_theta;
            let outer = mesh.quad_triangles(i, n_rad - 1);
            let (va, vb) = (mesh.lattice_index(i, n_rad), mesh.lattice_index(ip, n_rad));
            let tri = if mesh.triangle_has_edge(outer[0], va, vb) {
                outer[0]
            } else {
                outer[1]
            };
            mesh.boundary_edges.push(BoundaryEdge {
                vertices: [va, vb],
                tag: BoundaryTag::NeumannOuter,
                triangle: tri,
            });
        }
        Ok(mesh)
    }

    /// Split rule for a quad in the upper half: take the diagonal whose midpoint
    /// lies farther from the inner center; on ties, the diagonal leaving the
    /// inner vertex of the ray closer to the `e1`-axis.
    fn upper_quad_split(&self, i: usize, j: usize) -> bool {
        let n = self.resolution.n_theta;
        let center = self.domain.inner_center();
        let ip = (i + 1) % n;
        let a = self.vertex(self.lattice_index(i, j));
        let b = self.vertex(self.lattice_index(ip, j));
        let c = self.vertex(self.lattice_index(ip, j + 1));
        let d = self.vertex(self.lattice_index(i, j + 1));
        let dist_ac = (0.5 * (a + c)).distance(center);
        let dist_bd = (0.5 * (b + d)).distance(center);
        let scale = dist_ac.max(dist_bd);
        if (dist_ac - dist_bd).abs() > 1e-12 * scale {
            return dist_ac > dist_bd;
        }
        // 2 (2i + 1) vs n compares the quad's mid-angle against pi/2.
        4 * i + 2 <= n
    }

    pub fn domain(&self) -> &AnnularDomain {
        &self.domain
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn n_theta(&self) -> usize {
        self.resolution.n_theta
    }

    pub fn n_rad(&self) -> usize {
        self.resolution.n_rad
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    /// Unit direction of ray `i`.
    pub fn direction(&self, i: usize) -> Point {
        self.directions[i]
    }

    pub fn ray_length(&self, i: usize) -> f64 {
        self.ray_lengths[i]
    }

    /// Vertex index of lattice node `(i, j)`.
    pub fn lattice_index(&self, i: usize, j: usize) -> usize {
        j * self.resolution.n_theta + i
    }

    /// Lattice coordinates `(i, j)` of a vertex.
    pub fn lattice_coords(&self, v: usize) -> (usize, usize) {
        (v % self.resolution.n_theta, v / self.resolution.n_theta)
    }

    /// Index of the vertex mirrored by `x2 -> -x2`.
    pub fn mirror_vertex(&self, v: usize) -> usize {
        let n = self.resolution.n_theta;
        let (i, j) = self.lattice_coords(v);
        self.lattice_index((n - i) % n, j)
    }

    /// The two triangles of lattice quad `(i, j)`.
    pub fn quad_triangles(&self, i: usize, j: usize) -> [usize; 2] {
        let t = 2 * (i * self.resolution.n_rad + j);
        [t, t + 1]
    }

    fn triangle_has_edge(&self, t: usize, a: usize, b: usize) -> bool {
        let tri = self.triangles[t];
        tri.contains(&a) && tri.contains(&b)
    }

    pub fn is_on_tag(&self, v: usize, tag: BoundaryTag) -> bool {
        let (_, j) = self.lattice_coords(v);
        match tag {
            BoundaryTag::DirichletInner => j == 0,
            BoundaryTag::NeumannOuter => j == self.resolution.n_rad,
        }
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        let (_, j) = self.lattice_coords(v);
        j == 0 || j == self.resolution.n_rad
    }

    pub fn triangle_vertices(&self, t: usize) -> [Point; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        triangle_area(a, b, c)
    }

    /// Area and the constant gradients of the three P1 hat functions.
    pub fn triangle_gradients(&self, t: usize) -> (f64, [Point; 3]) {
        let [a, b, c] = self.triangle_vertices(t);
        p1_gradients(a, b, c)
    }

    /// Total area of the triangulation.
    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_degrees(&self) -> f64 {
        let mut worst = 180.0f64;
        for t in 0..self.triangles.len() {
            let p = self.triangle_vertices(t);
            for k in 0..3 {
                let u = p[(k + 1) % 3] - p[k];
                let w = p[(k + 2) % 3] - p[k];
                let ang = u.cross(w).abs().atan2(u.dot(w)).to_degrees();
                worst = worst.min(ang);
            }
        }
        worst
    }

    /// Longest edge among the triangles touching vertex `v`.
    pub fn local_size(&self, v: usize) -> f64 {
        let (i, j) = self.lattice_coords(v);
        let n = self.resolution.n_theta;
        let mut h = 0.0f64;
        let p = self.vertices[v];
        for (di, dj) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)] {
            let jj = j as isize + dj;
            if jj < 0 || jj > self.resolution.n_rad as isize {
                continue;
            }
            let ii = (i as isize + di).rem_euclid(n as isize) as usize;
            h = h.max(p.distance(self.vertices[self.lattice_index(ii, jj as usize)]));
        }
        h
    }

    /// Locate `p`, falling back to extrapolation from the nearest candidate
    /// triangle for points between the polygonal boundary and the true circles.
    pub fn locate(&self, p: Point) -> Result<Location> {
        let n = self.resolution.n_theta;
        let n_rad = self.resolution.n_rad;
        let d = p - self.domain.inner_center();
        let rho = d.norm();
        let mut phi = d.y.atan2(d.x);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        let fi = phi / (2.0 * PI / n as f64);
        let i0 = (fi.floor() as isize).rem_euclid(n as isize);
        let exit = self.domain.ray_exit_distance(phi);
        let t = (rho - self.domain.r0()) / (exit - self.domain.r0());
        let j0 = (self.resolution.layer_coordinate(t).floor() as isize).clamp(0, n_rad as isize - 1);

        let mut best: Option<(f64, usize, [f64; 3])> = None;
        for radius in [1isize, 3] {
            for di in -radius..=radius {
                let i = (i0 + di).rem_euclid(n as isize) as usize;
                for dj in -radius..=radius {
                    let j = j0 + dj;
                    if j < 0 || j >= n_rad as isize {
                        continue;
                    }
                    for t in self.quad_triangles(i, j as usize) {
                        let [a, b, c] = self.triangle_vertices(t);
                        let bary = barycentric(a, b, c, p);
                        let worst = bary[0].min(bary[1]).min(bary[2]);
                        if worst >= -1e-12 {
                            return Ok(Location {
                                triangle: t,
                                barycentric: bary,
                                inside: true,
                            });
                        }
                        if best.map_or(true, |(w, _, _)| worst > w) {
                            best = Some((worst, t, bary));
                        }
                    }
                }
            }
            if let Some((worst, t, bary)) = best {
                // only accept extrapolation for points hugging the boundary
                if worst > -1.0 && radius == 3 {
                    return Ok(Location {
                        triangle: t,
                        barycentric: bary,
                        inside: false,
                    });
                }
            }
        }
        Err(Error::PointLocation { x: p.x, y: p.y })
    }

    /// P1 interpolation of per-vertex `values` at `p`.
    pub fn interpolate(&self, values: &[f64], p: Point) -> Result<f64> {
        let loc = self.locate(p)?;
        let tri = self.triangles[loc.triangle];
        Ok((0..3).map(|k| loc.barycentric[k] * values[tri[k]]).sum())
    }
}

pub(crate) fn p1_gradients(a: Point, b: Point, c: Point) -> (f64, [Point; 3]) {
    let area = triangle_area(a, b, c);
    let inv = 0.5 / area;
    // grad phi_k = perp(opposite edge) / (2 area)
    let g0 = Point::new(b.y - c.y, c.x - b.x);
    let g1 = Point::new(c.y - a.y, a.x - c.x);
    let g2 = Point::new(a.y - b.y, b.x - a.x);
    (area, [inv * g0, inv * g1, inv * g2])
}

fn barycentric(a: Point, b: Point, c: Point, p: Point) -> [f64; 3] {
    let area = triangle_area(a, b, c);
    let l0 = triangle_area(p, b, c) / area;
    let l1 = triangle_area(a, p, c) / area;
    [l0, l1, 1.0 - l0 - l1]
}
