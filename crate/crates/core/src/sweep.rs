//! Sweeps over the hole offset and the radius ratio, and mesh convergence studies.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::checks::{geometry_report, Subject};
use crate::error::{Error, Result};
use crate::export::num;
use crate::fem::{Assembly, ProblemKind};
use crate::geometry::AnnularDomain;
use crate::mesh::{Mesh, Resolution};
use crate::radial_oracle::concentric_eigenvalue;
use crate::shape::{
    dirichlet_normal_derivative, finite_difference, half_boundary_tau_prime, hadamard_tau_prime,
};
use crate::spectral::solve_on;
use crate::torsion::{rigidity_derivative, solve_torsion_on, torsional_rigidity};

/// Grid points per ratio in the DN analysis.
pub const DEFAULT_S_POINTS: usize = 20;

pub const CSV_HEADER: &str =
    "s,tau1,lambda1,nu1,T,dtau_hadamard,dtau_half,dtau_fd,dT_boundary,checks_pass";

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepSettings {
    pub resolution: Resolution,
    pub tol: f64,
    /// Step of the difference quotients in `s`.
    pub fd_step: f64,
    /// Corner exclusion radius as a fraction of `R1`.
    pub exclusion_fraction: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            resolution: Resolution::BASELINE,
            tol: 1e-9,
            fd_step: 0.05,
            exclusion_fraction: 0.05,
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub s: f64,
    pub tau1: f64,
    pub lambda1: f64,
    pub nu1: f64,
    pub T: f64,
    pub dtau_hadamard: f64,
    pub dtau_half: f64,
    pub dtau_fd: f64,
    pub dT_boundary: f64,
    pub dT_fd: f64,
    /// Energy form of the rigidity, for the discrete identity.
    pub T_energy: f64,
    /// All eigenfunction checks and torsion checks (a)-(c) pass.
    pub checks_pass: bool,
}

impl SweepRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            num(self.s),
            num(self.tau1),
            num(self.lambda1),
            num(self.nu1),
            num(self.T),
            num(self.dtau_hadamard),
            num(self.dtau_half),
            num(self.dtau_fd),
            num(self.dT_boundary),
            self.checks_pass
        )
    }
}

pub fn to_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

fn eigenvalue_at(d: &AnnularDomain, kind: ProblemKind, res: Resolution, tol: f64) -> Result<f64> {
    let asm = Assembly::new(Arc::new(Mesh::build(d, res)?));
    Ok(solve_on(&asm, kind, tol)?.value)
}

fn rigidity_at(d: &AnnularDomain, res: Resolution) -> Result<f64> {
    let asm = Assembly::new(Arc::new(Mesh::build(d, res)?));
    let v = solve_torsion_on(&asm)?;
    Ok(torsional_rigidity(&v.field, &asm)?.integral)
}

/// All quantities at one offset.
pub fn sweep_point(r0: f64, r1: f64, s: f64, cfg: &SweepSettings) -> Result<SweepRecord> {
    let d = AnnularDomain::new(r0, r1, s)?;
    let res = cfg.resolution;
    let asm = Assembly::new(Arc::new(Mesh::build(&d, res)?));
    let nd = solve_on(&asm, ProblemKind::ND, cfg.tol)?;
    let dd = solve_on(&asm, ProblemKind::DD, cfg.tol)?;
    let dn = solve_on(&asm, ProblemKind::DN, cfg.tol)?;
    let trace = dirichlet_normal_derivative(&nd.field, ProblemKind::ND)?;
    let dtau_hadamard = hadamard_tau_prime(&trace);
    let dtau_half = half_boundary_tau_prime(&trace, &d)?;
    let h = cfg.fd_step;
    let dtau_fd = finite_difference(&d, h, |x| eigenvalue_at(x, ProblemKind::ND, res, cfg.tol))?;

    let v = solve_torsion_on(&asm)?;
    let rig = torsional_rigidity(&v.field, &asm)?;
    let vtrace = dirichlet_normal_derivative(&v.field, ProblemKind::ND)?;
    let d_t_boundary = rigidity_derivative(&vtrace);
    let d_t_fd = finite_difference(&d, h, |x| rigidity_at(x, res))?;

    let exclusion = cfg.exclusion_fraction * r1;
    let rep = geometry_report(&nd.field, Subject::Eigenfunction(ProblemKind::ND), exclusion)?;
    let trep = geometry_report(&v.field, Subject::Torsion, exclusion)?;
    let checks_pass = rep.all_pass() && trep.pass_of(&["a_", "b_", "c_"]);
    Ok(SweepRecord {
        s,
        tau1: nd.value,
        lambda1: dd.value,
        nu1: dn.value,
        T: rig.integral,
        dtau_hadamard,
        dtau_half,
        dtau_fd,
        dT_boundary: d_t_boundary,
        dT_fd: d_t_fd,
        T_energy: rig.energy,
        checks_pass,
    })
}

/// Parses `start:step:end`, endpoints included within half a step.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::InvalidParameter(format!("grid '{spec}' is not start:step:end"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, step, end) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !(end >= start) || !start.is_finite() || !end.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "grid '{spec}' needs step > 0 and end >= start"
        )));
    }
    let count = ((end - start) / step + 0.5).floor() as usize;
    // multiply rather than accumulate so that 0:0.4:3.6 yields 1.2, not 1.2000000000000002
    Ok((0..=count)
        .map(|k| {
            let v = start + k as f64 * step;
            (v * 1e12).round() / 1e12
        })
        .collect())
}

fn validate_grid(r0: f64, r1: f64, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty s grid".into()));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidParameter("s grid must be strictly increasing".into()));
        }
    }
    for &s in grid {
        AnnularDomain::new(r0, r1, s)?;
    }
    Ok(())
}

/// One record per offset, computed independently and returned in grid order.
pub fn sweep_translation(r0: f64, r1: f64, grid: &[f64], cfg: &SweepSettings) -> Result<Vec<SweepRecord>> {
    validate_grid(r0, r1, grid)?;
    let results: Vec<Result<SweepRecord>> = grid
        .par_iter()
        .map(|&s| {
            sweep_point(r0, r1, s, cfg).map_err(|e| Error::AtOffset {
                s,
                source: Box::new(e),
            })
        })
        .collect();
    results.into_iter().collect()
}

/// Monotonicity and sign properties of a finished sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAssessment {
    pub tau_strictly_decreasing: bool,
    pub torsion_strictly_increasing: bool,
    pub hadamard_negative_for_positive_s: bool,
    pub mixed_below_dirichlet: bool,
    pub half_boundary_matches: bool,
    pub checks_pass: bool,
}

impl SweepAssessment {
    pub fn all(&self) -> bool {
        self.tau_strictly_decreasing
            && self.torsion_strictly_increasing
            && self.hadamard_negative_for_positive_s
            && self.mixed_below_dirichlet
            && self.half_boundary_matches
            && self.checks_pass
    }
}

pub fn assess(records: &[SweepRecord]) -> SweepAssessment {
    // near s = 0 both forms vanish, so the scale is floored at 1e-3 tau_1
    let same = |r: &SweepRecord| {
        (r.dtau_hadamard - r.dtau_half).abs() <= 1e-10 * r.dtau_hadamard.abs().max(1e-3 * r.tau1)
    };
    SweepAssessment {
        tau_strictly_decreasing: records.windows(2).all(|w| w[1].tau1 < w[0].tau1),
        torsion_strictly_increasing: records.windows(2).all(|w| w[1].T > w[0].T),
        hadamard_negative_for_positive_s: records.iter().filter(|r| r.s > 0.0).all(|r| r.dtau_hadamard < 0.0),
        mixed_below_dirichlet: records.iter().all(|r| r.tau1 < r.lambda1),
        half_boundary_matches: records.iter().all(same),
        checks_pass: records.iter().all(|r| r.checks_pass),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DnClass {
    InteriorMinimum,
    MonotoneDecreasing,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DnAnalysis {
    pub ratio: f64,
    pub r0: f64,
    pub r1: f64,
    pub class: DnClass,
    /// Golden-section minimizer, when an interior minimum was found.
    pub s0: Option<f64>,
    pub monotone_decreasing: bool,
    /// `(s, nu_1)` on the uniform grid.
    pub samples: Vec<(f64, f64)>,
    pub grid_spacing: f64,
}

/// Classifies a sampled profile by the signs of successive differences.
pub fn classify_profile(values: &[f64]) -> (DnClass, Option<usize>) {
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.iter().all(|&d| d < 0.0) {
        return (DnClass::MonotoneDecreasing, None);
    }
    // one change from decreasing to increasing, no zero steps
    let first_up = diffs.iter().position(|&d| d >= 0.0);
    match first_up {
        Some(k) if k > 0 && diffs[k..].iter().all(|&d| d > 0.0) => (DnClass::InteriorMinimum, Some(k)),
        _ => (DnClass::Inconclusive, None),
    }
}

/// Golden-section minimization of `f` on `[a, b]` down to width `tol`.
pub fn golden_section(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// `nu_1(s)` on `s_k = k (R1 - R0) / (n + 1)`, `k = 1..n`, classified and,
/// for an interior minimum, refined to `|ds| <= (R1 - R0) / 200`.
pub fn analyze_dn_ratio(r1: f64, ratio: f64, s_points: usize, res: Resolution, tol: f64) -> Result<DnAnalysis> {
    dn_profile(r1, ratio, s_points, res, tol, true)
}

fn dn_profile(r1: f64, ratio: f64, s_points: usize, res: Resolution, tol: f64, refine: bool) -> Result<DnAnalysis> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!("ratio {ratio} outside (0, 1)")));
    }
    if s_points < 12 {
        return Err(Error::InvalidParameter(format!("need at least 12 s points, got {s_points}")));
    }
    let r0 = ratio * r1;
    let gap = r1 - r0;
    let spacing = gap / (s_points + 1) as f64;
    let nu = |s: f64| eigenvalue_at(&AnnularDomain::new(r0, r1, s)?, ProblemKind::DN, res, tol);
    let grid: Vec<f64> = (1..=s_points).map(|k| k as f64 * spacing).collect();
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&s| nu(s))
        .collect::<Result<Vec<f64>>>()?;
    let (class, turn) = classify_profile(&values);
    let s0 = match turn {
        Some(k) if refine => {
            // minimum sample is index k; bracket by its neighbours
            let lo = if k == 0 { 0.5 * spacing } else { grid[k - 1] };
            let hi = grid[(k + 1).min(grid.len() - 1)];
            Some(golden_section(lo, hi, gap / 200.0, nu)?)
        }
        _ => None,
    };
    Ok(DnAnalysis {
        ratio,
        r0,
        r1,
        class,
        s0,
        monotone_decreasing: class == DnClass::MonotoneDecreasing,
        samples: grid.into_iter().zip(values).collect(),
        grid_spacing: spacing,
    })
}

pub fn analyze_dn_family(
    r1: f64,
    ratios: &[f64],
    s_points: usize,
    res: Resolution,
    tol: f64,
) -> Result<Vec<DnAnalysis>> {
    ratios
        .iter()
        .map(|&q| analyze_dn_ratio(r1, q, s_points, res, tol))
        .collect()
}

/// Bracket of the critical ratio between interior-minimum and monotone profiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioBracket {
    /// Largest tested ratio with an interior minimum.
    pub lower: f64,
    /// Smallest tested ratio with a monotone profile.
    pub upper: f64,
    pub analyses: Vec<DnAnalysis>,
    pub conclusive: bool,
}

impl RatioBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Bisection on the ratio between `lo` (interior minimum) and `hi` (monotone).
/// Midpoints are classified only; `s0` is not refined there.
pub fn bisect_critical_ratio(
    r1: f64,
    lo: f64,
    hi: f64,
    width: f64,
    s_points: usize,
    res: Resolution,
    tol: f64,
) -> Result<RatioBracket> {
    let a = dn_profile(r1, lo, s_points, res, tol, false)?;
    let b = dn_profile(r1, hi, s_points, res, tol, false)?;
    if a.class != DnClass::InteriorMinimum || b.class != DnClass::MonotoneDecreasing {
        return Ok(RatioBracket {
            lower: lo,
            upper: hi,
            analyses: vec![a, b],
            conclusive: false,
        });
    }
    let mut analyses = vec![a, b];
    let (mut lower, mut upper) = (lo, hi);
    while upper - lower > width {
        let mid = 0.5 * (lower + upper);
        let m = dn_profile(r1, mid, s_points, res, tol, false)?;
        let class = m.class;
        analyses.push(m);
        match class {
            DnClass::InteriorMinimum => lower = mid,
            DnClass::MonotoneDecreasing => upper = mid,
            DnClass::Inconclusive => {
                return Ok(RatioBracket {
                    lower,
                    upper,
                    analyses,
                    conclusive: false,
                })
            }
        }
    }
    Ok(RatioBracket {
        lower,
        upper,
        analyses,
        conclusive: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n_theta: usize,
    pub n_rad: usize,
    /// Nominal size `2 pi / n_theta`.
    pub h: f64,
    pub value: f64,
    /// Against the radial oracle on the concentric domain.
    pub oracle_error: Option<f64>,
    /// Order from this level and the previous one against the oracle.
    pub oracle_order: Option<f64>,
    /// Order from the triplet ending at this level.
    pub observed_order: Option<f64>,
    pub extrapolated: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub kind: ProblemKind,
    pub r0: f64,
    pub r1: f64,
    pub s: f64,
    pub oracle: Option<f64>,
    pub rows: Vec<ConvergenceRow>,
    /// Values decrease (non-strictly) under refinement.
    pub monotone: bool,
}

pub fn convergence_study(
    d: &AnnularDomain,
    kind: ProblemKind,
    base: Resolution,
    levels: usize,
    tol: f64,
) -> Result<ConvergenceStudy> {
    if levels < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 levels, got {levels}")));
    }
    let mut resolutions = vec![base];
    for _ in 1..levels {
        let last = *resolutions.last().unwrap();
        resolutions.push(last.refined());
    }
    let values: Vec<f64> = resolutions
        .iter()
        .map(|&r| eigenvalue_at(d, kind, r, tol))
        .collect::<Result<_>>()?;
    let oracle = (d.s() == 0.0).then(|| concentric_eigenvalue(kind, d.r0(), d.r1(), 2000));
    let mut rows = Vec::with_capacity(levels);
    for (k, (&r, &v)) in resolutions.iter().zip(&values).enumerate() {
        let err = oracle.map(|o| (v - o).abs());
        let oracle_order = match (k, oracle) {
            (k, Some(o)) if k > 0 => Some(((values[k - 1] - o).abs() / (v - o).abs()).log2()),
            _ => None,
        };
        let (observed_order, extrapolated) = if k >= 2 {
            let (a, b, c) = (values[k - 2], values[k - 1], v);
            let p = ((a - b) / (b - c)).abs().log2();
            (Some(p), Some(c + (c - b) / (2f64.powf(p) - 1.0)))
        } else {
            (None, None)
        };
        rows.push(ConvergenceRow {
            n_theta: r.n_theta,
            n_rad: r.n_rad,
            h: 2.0 * std::f64::consts::PI / r.n_theta as f64,
            value: v,
            oracle_error: err,
            oracle_order,
            observed_order,
            extrapolated,
        });
    }
    Ok(ConvergenceStudy {
        kind,
        r0: d.r0(),
        r1: d.r1(),
        s: d.s(),
        oracle,
        monotone: values.windows(2).all(|w| w[1] <= w[0]),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0:0.4:3.6").unwrap();
        assert_eq!(g.len(), 10);
        assert_eq!(g[3], 1.2);
        assert_eq!(g[9], 3.6);
        assert_eq!(parse_grid("1:1:1").unwrap(), vec![1.0]);
        assert!(parse_grid("0:0:1").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("2:0.5:1").is_err());
    }

    #[test]
    fn profile_classification() {
        assert_eq!(classify_profile(&[5.0, 4.0, 3.0]).0, DnClass::MonotoneDecreasing);
        assert_eq!(classify_profile(&[5.0, 4.0, 3.5, 3.7, 4.0]), (DnClass::InteriorMinimum, Some(2)));
        assert_eq!(classify_profile(&[5.0, 4.0, 4.5, 4.2]).0, DnClass::Inconclusive);
        assert_eq!(classify_profile(&[1.0, 2.0, 3.0]).0, DnClass::Inconclusive);
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let x = golden_section(0.0, 3.0, 1e-6, |x| Ok((x - 1.3) * (x - 1.3))).unwrap();
        assert!((x - 1.3).abs() < 1e-6);
    }

    #[test]
    fn csv_layout() {
        let r = SweepRecord {
            s: 0.4,
            tau1: 1.0,
            lambda1: 2.0,
            nu1: 1.5,
            T: 3.0,
            dtau_hadamard: -0.1,
            dtau_half: -0.1,
            dtau_fd: -0.1,
            dT_boundary: 0.2,
            dT_fd: 0.2,
            T_energy: 3.0,
            checks_pass: true,
        };
        let csv = to_csv(&[r]);
        assert_eq!(csv, format!("{CSV_HEADER}\n0.4,1,2,1.5,3,-0.1,-0.1,-0.1,0.2,true\n"));
    }

    #[test]
    fn coarse_sweep_is_order_independent() {
        let cfg = SweepSettings {
            resolution: Resolution::new(32, 8, 0.8).unwrap(),
            ..SweepSettings::default()
        };
        let grid = [0.0, 1.0, 2.0];
        let a = sweep_translation(1.0, 5.0, &grid, &cfg).unwrap();
        let b: Vec<SweepRecord> = grid.iter().rev().map(|&s| sweep_point(1.0, 5.0, s, &cfg).unwrap()).collect();
        let b: Vec<SweepRecord> = b.into_iter().rev().collect();
        assert_eq!(to_csv(&a), to_csv(&b));
        assert!(a.windows(2).all(|w| w[1].tau1 < w[0].tau1));
    }
}
