//! Polarization and foliated Schwarz rearrangement of ring samples of a field.
//!
//! A field on the annulus is extended by zero and sampled on circles about
//! either the origin (ball extension) or the hole center (concentric annulus
//! extension). Angles are `psi_q = 2 pi q / m` from `+e1`; the rearrangement
//! concentrates values toward `psi = pi`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::Field;
use crate::geometry::{Point, Polarizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RingCenter {
    /// Rings about `0`, radii in `(0.02 R0, R1)`.
    Origin,
    /// Rings about `s e1`, radii in `(R0, R1 + s)`.
    InnerCenter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RingSampling {
    pub center: Point,
    pub extension: RingCenter,
    pub radii: Vec<f64>,
    pub m: usize,
    /// `values[k][q]` at radius `radii[k]`, angle `psi_q`.
    pub values: Vec<Vec<f64>>,
}

/// Unit vectors at `psi_q`, with `q` and `m - q` exact mirrors in `x2`.
fn ring_directions(m: usize) -> Vec<Point> {
    let mut dirs = vec![Point::ORIGIN; m];
    for (q, d) in dirs.iter_mut().enumerate().take(m / 2 + 1) {
        let a = 2.0 * PI * q as f64 / m as f64;
        *d = if q == 0 {
            Point::new(1.0, 0.0)
        } else if 2 * q == m {
            Point::new(-1.0, 0.0)
        } else {
            Point::new(a.cos(), a.sin())
        };
    }
    for q in m / 2 + 1..m {
        dirs[q] = dirs[m - q].mirror_x2();
    }
    dirs
}

pub fn sample_rings(u: &Field, m: usize, n_rings: usize, center: RingCenter) -> Result<RingSampling> {
    if m < 4 || m % 2 != 0 {
        return Err(Error::InvalidParameter(format!("ring sample count {m} must be even and at least 4")));
    }
    if n_rings == 0 {
        return Err(Error::InvalidParameter("at least one ring required".into()));
    }
    let d = *u.mesh().domain();
    let (c, r_min, r_max) = match center {
        RingCenter::Origin => (Point::ORIGIN, 0.02 * d.r0(), d.r1()),
        RingCenter::InnerCenter => (d.inner_center(), d.r0(), d.r1() + d.s()),
    };
    let dr = (r_max - r_min) / n_rings as f64;
    let radii: Vec<f64> = (0..n_rings).map(|k| r_min + (k as f64 + 0.5) * dr).collect();
    let dirs = ring_directions(m);
    let mut values = Vec::with_capacity(n_rings);
    for &r in &radii {
        let mut ring = Vec::with_capacity(m);
        for dir in &dirs {
            let p = c + r * *dir;
            ring.push(if d.contains(p) { u.interpolate(p)? } else { 0.0 });
        }
        values.push(ring);
    }
    Ok(RingSampling {
        center: c,
        extension: center,
        radii,
        m,
        values,
    })
}

/// Index form of a grid-aligned reflection through the ring center.
#[derive(Debug, Clone, Copy)]
struct AlignedReflection {
    /// `sigma(q) = (k - q) mod m`.
    k: usize,
    m: usize,
}

impl AlignedReflection {
    fn from_polarizer(h: &Polarizer, center: Point, m: usize) -> Result<Self> {
        let scale = center.norm().max(1.0);
        if h.offset(center).abs() > 1e-12 * scale {
            return Err(Error::Alignment("polarizer boundary misses the ring center".into()));
        }
        let beta = h.normal().y.atan2(h.normal().x);
        let steps = beta * m as f64 / PI;
        let j = steps.round();
        if (steps - j).abs() > 1e-9 {
            return Err(Error::Alignment(format!(
                "normal angle {beta} is not a multiple of pi/{m}"
            )));
        }
        // 2 beta + pi = 2 pi k / m
        let k = (j as i64 + (m / 2) as i64).rem_euclid(m as i64) as usize;
        Ok(AlignedReflection { k, m })
    }

    fn image(&self, q: usize) -> usize {
        (self.k + self.m - q) % self.m
    }

    /// `d = (2q - k) mod 2m`: inside `H` for `0 < d < m`, on the line for `d = 0, m`.
    fn side(&self, q: usize) -> usize {
        (2 * q + 2 * self.m - self.k) % (2 * self.m)
    }

    fn in_h(&self, q: usize) -> bool {
        let d = self.side(q);
        0 < d && d < self.m
    }
}

/// `u^H`: on each ring the `H` side takes the larger value of each mirror pair.
pub fn polarize(rs: &RingSampling, h: &Polarizer) -> Result<RingSampling> {
    let refl = AlignedReflection::from_polarizer(h, rs.center, rs.m)?;
    let mut out = rs.clone();
    for (ring, src) in out.values.iter_mut().zip(&rs.values) {
        for q in 0..rs.m {
            if refl.in_h(q) {
                let p = refl.image(q);
                let (a, b) = (src[q], src[p]);
                ring[q] = a.max(b);
                ring[p] = a.min(b);
            }
        }
    }
    Ok(out)
}

/// Normal angles `j pi / m`, `|j| < m / 2`: the grid-aligned polarizers through
/// the ring center whose half-plane contains the `-e1` direction.
pub fn aligned_star_polarizers(rs: &RingSampling) -> Vec<Polarizer> {
    let half = (rs.m / 2) as i64;
    (1 - half..half)
        .map(|j| Polarizer::from_angle(j as f64 * PI / rs.m as f64, rs.center))
        .collect()
}

/// Sample index receiving the value of descending rank `r`.
fn placement(rank: usize, m: usize) -> usize {
    let half = m / 2;
    if rank == 0 {
        half
    } else if rank == m - 1 {
        0
    } else {
        let t = (rank + 1) / 2;
        if rank % 2 == 1 {
            half - t
        } else {
            half + t
        }
    }
}

/// `u*`: each ring sorted descending and laid out from `psi = pi` outward,
/// upper half first.
pub fn foliated_schwarz(rs: &RingSampling) -> RingSampling {
    let mut out = rs.clone();
    for (ring, src) in out.values.iter_mut().zip(&rs.values) {
        let mut sorted = src.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        for (rank, v) in sorted.into_iter().enumerate() {
            ring[placement(rank, rs.m)] = v;
        }
    }
    out
}

fn same_geometry(a: &RingSampling, b: &RingSampling) -> Result<()> {
    if a.m != b.m || a.radii != b.radii || a.center != b.center || a.values.len() != b.values.len() {
        return Err(Error::GeometryMismatch("ring samplings differ in layout".into()));
    }
    Ok(())
}

/// Relative weighted l2 distance `||a - b|| / ||a||`, weights `2 pi r_k / m`.
pub fn deviation(a: &RingSampling, b: &RingSampling) -> Result<f64> {
    same_geometry(a, b)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, r) in a.radii.iter().enumerate() {
        let w = 2.0 * PI * r / a.m as f64;
        for q in 0..a.m {
            let d = a.values[k][q] - b.values[k][q];
            num += w * d * d;
            den += w * a.values[k][q] * a.values[k][q];
        }
    }
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((num / den).sqrt())
}

/// Per-ring `(l1, l2, linf)` norms, summed over sorted values so that
/// rearrangements give bit-identical results.
pub fn ring_norms(rs: &RingSampling) -> Vec<[f64; 3]> {
    rs.values
        .iter()
        .map(|ring| {
            let mut s: Vec<f64> = ring.iter().map(|v| v.abs()).collect();
            s.sort_by(|a, b| a.total_cmp(b));
            let l1: f64 = s.iter().sum();
            let l2 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
            let linf = s.last().copied().unwrap_or(0.0);
            [l1, l2, linf]
        })
        .collect()
}

/// Sorted copy of each ring, for equimeasurability checks.
pub fn sorted_rings(rs: &RingSampling) -> Vec<Vec<f64>> {
    rs.values
        .iter()
        .map(|ring| {
            let mut s = ring.clone();
            s.sort_by(|a, b| a.total_cmp(b));
            s
        })
        .collect()
}

/// `||grad u||_p` on the polar sample grid (central differences, one-sided on
/// the first and last ring); `p = inf` gives the maximum.
pub fn gradient_norm(rs: &RingSampling, p: f64) -> f64 {
    let n = rs.radii.len();
    let m = rs.m;
    let dpsi = 2.0 * PI / m as f64;
    let mut acc = 0.0f64;
    for k in 0..n {
        let r = rs.radii[k];
        let dr = if n > 1 { rs.radii[1] - rs.radii[0] } else { r };
        for q in 0..m {
            let ur = if n == 1 {
                0.0
            } else if k == 0 {
                (rs.values[1][q] - rs.values[0][q]) / dr
            } else if k == n - 1 {
                (rs.values[k][q] - rs.values[k - 1][q]) / dr
            } else {
                (rs.values[k + 1][q] - rs.values[k - 1][q]) / (2.0 * dr)
            };
            let up = (rs.values[k][(q + 1) % m] - rs.values[k][(q + m - 1) % m]) / (2.0 * dpsi * r);
            let g = (ur * ur + up * up).sqrt();
            if p.is_infinite() {
                acc = acc.max(g);
            } else {
                acc += g.powf(p) * r * dr * dpsi;
            }
        }
    }
    if p.is_infinite() {
        acc
    } else {
        acc.powf(1.0 / p)
    }
}

/// Deviation from the rearrangement and polarization invariants of one sampling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub extension: RingCenter,
    pub m: usize,
    pub n_rings: usize,
    /// `||u - u*|| / ||u||`.
    pub star_deviation: f64,
    /// Largest `||u - u^H|| / ||u||` over the aligned `H_*` polarizers.
    pub max_polarization_deviation: f64,
    /// Sorted ring values of `u*` and every `u^H` equal those of `u` bit for bit.
    pub equimeasurable: bool,
    /// Per-ring value norms of `u*` and every `u^H` equal those of `u` bit for bit.
    pub norms_preserved: bool,
    /// `polarize(u*, H) == u*` for every aligned `H_*` polarizer.
    pub star_fixed: bool,
}

pub fn symmetry_report(u: &Field, m: usize, n_rings: usize, center: RingCenter) -> Result<SymmetryReport> {
    let rs = sample_rings(u, m, n_rings, center)?;
    let star = foliated_schwarz(&rs);
    let sorted = sorted_rings(&rs);
    let norms = ring_norms(&rs);
    let mut equimeasurable = sorted_rings(&star) == sorted;
    let mut norms_preserved = ring_norms(&star) == norms;
    let mut star_fixed = true;
    let mut max_pol: f64 = 0.0;
    for h in aligned_star_polarizers(&rs) {
        let p = polarize(&rs, &h)?;
        max_pol = max_pol.max(deviation(&rs, &p)?);
        equimeasurable &= sorted_rings(&p) == sorted;
        norms_preserved &= ring_norms(&p) == norms;
        star_fixed &= polarize(&star, &h)?.values == star.values;
    }
    Ok(SymmetryReport {
        extension: center,
        m,
        n_rings,
        star_deviation: deviation(&rs, &star)?,
        max_polarization_deviation: max_pol,
        equimeasurable,
        norms_preserved,
        star_fixed,
    })
}
