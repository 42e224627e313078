//! `zaremba` command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use zaremba::checks::{geometry_report, GeometryReport, Subject};
use zaremba::export::{field_csv, field_vtk, line_chart_svg, num, rings_csv, write_text, Series};
use zaremba::fem::Assembly;
use zaremba::shape::{
    dirichlet_normal_derivative, dirichlet_trace, eulerian_derivative, finite_difference, hadamard_tau_prime,
    half_boundary_tau_prime, torsion_flux_trace, TraceMethod, VectorField,
};
use zaremba::spectral::solve_on;
use zaremba::sweep::{
    analyze_dn_family, assess, bisect_critical_ratio, convergence_study, parse_grid, sweep_translation,
    to_csv, DnClass, SweepSettings, DEFAULT_S_POINTS,
};
use zaremba::symmetrize::{sample_rings, symmetry_report, RingCenter};
use zaremba::torsion::{rigidity_derivative, solve_torsion_on, torsional_rigidity};
use zaremba::{AnnularDomain, Error, Mesh, ProblemKind, Resolution};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;
const EXIT_ASSERTION: u8 = 4;
const EXIT_INTERNAL: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "zaremba", version, about = "Mixed Dirichlet-Neumann eigenvalues on eccentric annuli")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one eigenproblem and export the eigenfunction.
    Solve(Opts),
    /// Solve the torsion problem and report the rigidity.
    Torsion(Opts),
    /// Geometry checks and symmetrization deviations (JSON).
    SymmetryCheck(Opts),
    /// Hadamard, half-boundary and finite-difference derivatives at one offset.
    ShapeDerivative(Opts),
    /// Sweep the offset over a grid (CSV).
    Sweep(Opts),
    /// Classify the DN eigenvalue profile for several radius ratios.
    DnAnalyze(Opts),
    /// Mesh convergence study.
    Converge(Opts),
}

/// All flags; unset flags fall back to the config file, then to the defaults.
#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct Opts {
    /// Inner radius [default: 1]
    #[arg(long = "R0")]
    #[serde(rename = "R0")]
    r0: Option<f64>,
    /// Outer radius [default: 5]
    #[arg(long = "R1")]
    #[serde(rename = "R1")]
    r1: Option<f64>,
    /// Hole offset along e1 [default: 0]
    #[arg(long)]
    s: Option<f64>,
    /// Offset grid start:step:end, endpoints inclusive [default: 0:0.4:3.6]
    #[arg(long)]
    s_grid: Option<String>,
    /// Boundary condition split: nd, dn or dd [default: nd]
    #[arg(long)]
    kind: Option<String>,
    /// Angular rays [default: 256]
    #[arg(long)]
    n_theta: Option<usize>,
    /// Radial layers [default: 64]
    #[arg(long)]
    n_rad: Option<usize>,
    /// Radial grading in [0.5, 2], below 1 clusters layers at the inner circle [default: 0.8]
    #[arg(long)]
    grading: Option<f64>,
    /// Eigen-residual tolerance [default: 1e-9]
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory [default: out]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write legacy VTK field files
    #[arg(long)]
    #[serde(default)]
    vtk: bool,
    /// Also write SVG line charts
    #[arg(long)]
    #[serde(default)]
    svg: bool,
    /// Worker threads [default: machine parallelism]
    #[arg(long)]
    threads: Option<usize>,
    /// JSON config file with the same keys as the flags
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Finite-difference step in s [default: 0.05]
    #[arg(long)]
    fd_step: Option<f64>,
    /// Corner exclusion radius as a fraction of R1 [default: 0.05]
    #[arg(long)]
    exclusion: Option<f64>,
    /// Samples per ring, even [default: n-theta]
    #[arg(long)]
    ring_samples: Option<usize>,
    /// Number of rings [default: n-rad]
    #[arg(long)]
    rings: Option<usize>,
    /// Comma-separated R0/R1 ratios for dn-analyze [default: 0.1,0.6]
    #[arg(long)]
    ratios: Option<String>,
    /// Grid points per ratio for dn-analyze, at least 12 [default: 20]
    #[arg(long)]
    s_points: Option<usize>,
    /// Bisect the critical ratio between the smallest and largest ratio
    #[arg(long)]
    #[serde(default)]
    bisect: bool,
    /// Target bracket width for the ratio bisection [default: 0.05]
    #[arg(long)]
    bisect_width: Option<f64>,
    /// Refinement levels for converge, at least 3 [default: 3]
    #[arg(long)]
    levels: Option<usize>,
}

impl Opts {
    /// Fills every unset field from `base`.
    fn or(self, base: Opts) -> Opts {
        Opts {
            r0: self.r0.or(base.r0),
            r1: self.r1.or(base.r1),
            s: self.s.or(base.s),
            s_grid: self.s_grid.or(base.s_grid),
            kind: self.kind.or(base.kind),
            n_theta: self.n_theta.or(base.n_theta),
            n_rad: self.n_rad.or(base.n_rad),
            grading: self.grading.or(base.grading),
            tol: self.tol.or(base.tol),
            out: self.out.or(base.out),
            vtk: self.vtk || base.vtk,
            svg: self.svg || base.svg,
            threads: self.threads.or(base.threads),
            config: self.config,
            fd_step: self.fd_step.or(base.fd_step),
            exclusion: self.exclusion.or(base.exclusion),
            ring_samples: self.ring_samples.or(base.ring_samples),
            rings: self.rings.or(base.rings),
            ratios: self.ratios.or(base.ratios),
            s_points: self.s_points.or(base.s_points),
            bisect: self.bisect || base.bisect,
            bisect_width: self.bisect_width.or(base.bisect_width),
            levels: self.levels.or(base.levels),
        }
    }
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone, Serialize)]
struct RunConfig {
    #[serde(rename = "R0")]
    r0: f64,
    #[serde(rename = "R1")]
    r1: f64,
    s: f64,
    s_grid: Vec<f64>,
    kind: ProblemKind,
    resolution: Resolution,
    tol: f64,
    out: PathBuf,
    vtk: bool,
    svg: bool,
    threads: Option<usize>,
    fd_step: f64,
    exclusion: f64,
    ring_samples: usize,
    rings: usize,
    ratios: Vec<f64>,
    s_points: usize,
    bisect: bool,
    bisect_width: f64,
    levels: usize,
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Core(Error),
    Assertion(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Assertion(_) => EXIT_ASSERTION,
            Failure::Core(e) => match e.root() {
                Error::InvalidDomain(_)
                | Error::InvalidParameter(_)
                | Error::DegeneratePoint
                | Error::MeshQuality { .. } => EXIT_VALIDATION,
                Error::NonConvergence { .. } | Error::NegativeRayleigh(_) => EXIT_NONCONVERGENCE,
                _ => EXIT_INTERNAL,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Validation(m) => format!("validation error: {m}"),
            Failure::Assertion(m) => format!("assertion failed: {m}"),
            Failure::Core(e) => format!("error: {e}"),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn parse_ratios(s: &str) -> Outcome<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Failure::Validation(format!("ratios '{s}' must be comma-separated numbers")))?;
    if v.is_empty() || v.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
        return Err(Failure::Validation(format!("ratios '{s}' must lie in (0, 1)")));
    }
    Ok(v)
}

fn resolve(opts: Opts) -> Outcome<RunConfig> {
    let file = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Validation(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<Opts>(&text)
                .map_err(|e| Failure::Validation(format!("bad config {}: {e}", path.display())))?
        }
        None => Opts::default(),
    };
    let o = opts.or(file);
    let r0 = o.r0.unwrap_or(1.0);
    let r1 = o.r1.unwrap_or(5.0);
    let s = o.s.unwrap_or(0.0);
    AnnularDomain::new(r0, r1, s)?;
    let kind: ProblemKind = o.kind.as_deref().unwrap_or("nd").parse()?;
    let resolution = Resolution::new(
        o.n_theta.unwrap_or(Resolution::BASELINE.n_theta),
        o.n_rad.unwrap_or(Resolution::BASELINE.n_rad),
        o.grading.unwrap_or(Resolution::BASELINE.grading),
    )?;
    let tol = o.tol.unwrap_or(1e-9);
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Failure::Validation(format!("tol {tol} must lie in (0, 1)")));
    }
    let s_grid = parse_grid(o.s_grid.as_deref().unwrap_or("0:0.4:3.6"))?;
    let fd_step = o.fd_step.unwrap_or(0.05);
    if !(fd_step > 0.0) {
        return Err(Failure::Validation(format!("fd-step {fd_step} must be positive")));
    }
    let exclusion = o.exclusion.unwrap_or(0.05);
    if !(0.0..0.5).contains(&exclusion) {
        return Err(Failure::Validation(format!("exclusion {exclusion} must lie in [0, 0.5)")));
    }
    if o.threads == Some(0) {
        return Err(Failure::Validation("threads must be at least 1".into()));
    }
    let bisect_width = o.bisect_width.unwrap_or(0.05);
    if !(bisect_width > 0.0) {
        return Err(Failure::Validation(format!("bisect-width {bisect_width} must be positive")));
    }
    Ok(RunConfig {
        r0,
        r1,
        s,
        s_grid,
        kind,
        resolution,
        tol,
        out: o.out.unwrap_or_else(|| PathBuf::from("out")),
        vtk: o.vtk,
        svg: o.svg,
        threads: o.threads,
        fd_step,
        exclusion,
        ring_samples: o.ring_samples.unwrap_or(resolution.n_theta),
        rings: o.rings.unwrap_or(resolution.n_rad),
        ratios: parse_ratios(o.ratios.as_deref().unwrap_or("0.1,0.6"))?,
        s_points: o.s_points.unwrap_or(DEFAULT_S_POINTS),
        bisect: o.bisect,
        bisect_width,
        levels: o.levels.unwrap_or(3),
    })
}

fn value_name(kind: ProblemKind) -> &'static str {
    match kind {
        ProblemKind::ND => "tau1",
        ProblemKind::DN => "nu1",
        ProblemKind::DD => "lambda1",
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Outcome<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    write_text(path, &text)?;
    Ok(())
}

fn domain(cfg: &RunConfig) -> Outcome<AnnularDomain> {
    Ok(AnnularDomain::new(cfg.r0, cfg.r1, cfg.s)?)
}

fn assembly(cfg: &RunConfig) -> Outcome<Assembly> {
    Ok(Assembly::new(Arc::new(Mesh::build(&domain(cfg)?, cfg.resolution)?)))
}

fn cmd_solve(cfg: &RunConfig) -> Outcome<()> {
    let asm = assembly(cfg)?;
    let ef = solve_on(&asm, cfg.kind, cfg.tol)?;
    let name = value_name(cfg.kind);
    println!("{name} = {}", ef.value);
    let stem = format!("{}_field", cfg.kind.name());
    write_text(&cfg.out.join(format!("{stem}.csv")), &field_csv(&ef.field))?;
    if cfg.vtk {
        write_text(&cfg.out.join(format!("{stem}.vtk")), &field_vtk(&ef.field, name))?;
    }
    if cfg.svg {
        let mesh = ef.mesh();
        let outer: Vec<(f64, f64)> = (0..mesh.n_theta())
            .map(|i| {
                let v = mesh.lattice_index(i, mesh.n_rad());
                let p = mesh.vertex(v);
                (p.y.atan2(p.x), ef.field.value(v))
            })
            .collect();
        let mut outer = outer;
        outer.sort_by(|a, b| a.0.total_cmp(&b.0));
        let svg = line_chart_svg("outer boundary trace", "polar angle", "u", &[Series::new(name, outer)])?;
        write_text(&cfg.out.join(format!("{stem}_outer.svg")), &svg)?;
    }
    write_json(
        &cfg.out.join("solve.json"),
        &json!({
            "config": cfg,
            "kind": cfg.kind.name(),
            "value": ef.value,
            "residual": ef.residual,
            "outer_iterations": ef.outer_iterations,
            "min_angle_degrees": ef.mesh().min_angle_degrees(),
        }),
    )
}

fn cmd_torsion(cfg: &RunConfig) -> Outcome<()> {
    let asm = assembly(cfg)?;
    let v = solve_torsion_on(&asm)?;
    let t = torsional_rigidity(&v.field, &asm)?;
    let element = rigidity_derivative(&dirichlet_normal_derivative(&v.field, ProblemKind::ND)?);
    let flux = rigidity_derivative(&torsion_flux_trace(&v.field, &asm)?);
    println!("T = {}", t.integral);
    println!("dT_boundary = {element}");
    write_text(&cfg.out.join("torsion_field.csv"), &field_csv(&v.field))?;
    if cfg.vtk {
        write_text(&cfg.out.join("torsion_field.vtk"), &field_vtk(&v.field, "torsion"))?;
    }
    write_json(
        &cfg.out.join("torsion.json"),
        &json!({
            "config": cfg,
            "T_energy": t.energy,
            "T_integral": t.integral,
            "dT_boundary": element,
            "dT_boundary_flux": flux,
            "residual": v.residual,
        }),
    )
}

fn cmd_symmetry(cfg: &RunConfig) -> Outcome<()> {
    let asm = assembly(cfg)?;
    let ef = solve_on(&asm, ProblemKind::ND, cfg.tol)?;
    let excl = cfg.exclusion * cfg.r1;
    let u_report = geometry_report(&ef.field, Subject::Eigenfunction(ProblemKind::ND), excl)?;
    let v = solve_torsion_on(&asm)?;
    let v_report = geometry_report(&v.field, Subject::Torsion, excl)?;
    let mut sym = Vec::new();
    for center in [RingCenter::Origin, RingCenter::InnerCenter] {
        sym.push(symmetry_report(&ef.field, cfg.ring_samples, cfg.rings, center)?);
        let rs = sample_rings(&ef.field, cfg.ring_samples, cfg.rings, center)?;
        let file = match center {
            RingCenter::Origin => "rings_origin.csv",
            RingCenter::InnerCenter => "rings_inner.csv",
        };
        write_text(&cfg.out.join(file), &rings_csv(&rs))?;
    }
    write_json(
        &cfg.out.join("symmetry.json"),
        &json!({
            "config": cfg,
            "eigenvalue": ef.value,
            "eigenfunction_checks": u_report,
            "torsion_checks": v_report,
            "symmetrization": sym,
        }),
    )?;
    print_report(&u_report);
    print_report(&v_report);
    let mut failed = Vec::new();
    if !u_report.all_pass() {
        failed.push("eigenfunction geometry checks".to_string());
    }
    if !v_report.pass_of(&["a_", "b_", "c_"]) {
        failed.push("torsion checks (a)-(c)".to_string());
    }
    for r in &sym {
        println!(
            "{:?}: star deviation {:.3e}, max polarization deviation {:.3e}",
            r.extension, r.star_deviation, r.max_polarization_deviation
        );
        if r.star_deviation > 0.02 || r.max_polarization_deviation > 0.02 {
            failed.push(format!("{:?} deviation above 2%", r.extension));
        }
        if !(r.equimeasurable && r.norms_preserved && r.star_fixed) {
            failed.push(format!("{:?} rearrangement invariants", r.extension));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion(failed.join(", ")))
    }
}

fn print_report(r: &GeometryReport) {
    for c in &r.checks {
        println!(
            "{:?} {:<22} {} worst {:+.3e} ({} tested, {} violations)",
            r.subject,
            c.name,
            if c.pass { "pass" } else { "FAIL" },
            c.worst,
            c.tested,
            c.violations
        );
    }
}

fn cmd_shape(cfg: &RunConfig) -> Outcome<()> {
    let d = domain(cfg)?;
    let asm = assembly(cfg)?;
    let ef = solve_on(&asm, ProblemKind::ND, cfg.tol)?;
    let trace = dirichlet_trace(&ef.field, ef.value, &asm, ProblemKind::ND, TraceMethod::ElementGradient)?;
    let flux = dirichlet_trace(&ef.field, ef.value, &asm, ProblemKind::ND, TraceMethod::VariationalFlux)?;
    let hadamard = hadamard_tau_prime(&trace);
    let half = half_boundary_tau_prime(&trace, &d)?;
    let hadamard_flux = hadamard_tau_prime(&flux);
    let eulerian = eulerian_derivative(
        &ef.field,
        ef.value,
        &VectorField::translation(ef.mesh()),
        ProblemKind::ND,
        &trace,
    )?;
    let (res, tol) = (cfg.resolution, cfg.tol);
    let fd = finite_difference(&d, cfg.fd_step, |x| {
        let a = Assembly::new(Arc::new(Mesh::build(x, res)?));
        Ok(solve_on(&a, ProblemKind::ND, tol)?.value)
    })?;
    println!("tau1 = {}", ef.value);
    println!("dtau_hadamard = {hadamard}");
    println!("dtau_half = {half}");
    println!("dtau_hadamard_flux = {hadamard_flux}");
    println!("dtau_eulerian = {eulerian}");
    println!("dtau_fd = {fd}");
    write_json(
        &cfg.out.join("shape_derivative.json"),
        &json!({
            "config": cfg,
            "tau1": ef.value,
            "dtau_hadamard": hadamard,
            "dtau_half": half,
            "dtau_hadamard_flux": hadamard_flux,
            "dtau_eulerian": eulerian,
            "dtau_fd": fd,
        }),
    )?;
    let mut failed = Vec::new();
    if (hadamard - half).abs() > 1e-10 * hadamard.abs().max(1e-3 * ef.value) {
        failed.push("half-boundary form differs from the full form".to_string());
    }
    if cfg.s == 0.0 {
        if hadamard.abs() > 1e-3 * ef.value / cfg.r1 {
            failed.push("derivative at s = 0 is not negligible".to_string());
        }
    } else if (hadamard - fd).abs() > 0.05 * fd.abs() {
        failed.push("hadamard and finite difference differ by more than 5%".to_string());
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion(failed.join(", ")))
    }
}

fn cmd_sweep(cfg: &RunConfig) -> Outcome<()> {
    let settings = SweepSettings {
        resolution: cfg.resolution,
        tol: cfg.tol,
        fd_step: cfg.fd_step,
        exclusion_fraction: cfg.exclusion,
    };
    let records = sweep_translation(cfg.r0, cfg.r1, &cfg.s_grid, &settings)?;
    let csv = to_csv(&records);
    print!("{csv}");
    write_text(&cfg.out.join("sweep.csv"), &csv)?;
    let a = assess(&records);
    write_json(&cfg.out.join("sweep.json"), &json!({ "config": cfg, "records": records, "assessment": a }))?;
    if cfg.svg {
        let pick = |f: fn(&zaremba::sweep::SweepRecord) -> f64| records.iter().map(|r| (r.s, f(r))).collect();
        let charts = [
            ("sweep_tau1.svg", "tau1", vec![Series::new("tau1", pick(|r| r.tau1))]),
            ("sweep_torsion.svg", "T", vec![Series::new("T", pick(|r| r.T))]),
            (
                "sweep_dtau.svg",
                "dtau/ds",
                vec![
                    Series::new("hadamard", pick(|r| r.dtau_hadamard)),
                    Series::new("finite difference", pick(|r| r.dtau_fd)),
                ],
            ),
        ];
        for (file, label, series) in charts {
            write_text(&cfg.out.join(file), &line_chart_svg(label, "s", label, &series)?)?;
        }
    }
    if a.all() {
        Ok(())
    } else {
        Err(Failure::Assertion(format!("sweep assessment {a:?}")))
    }
}

fn cmd_dn(cfg: &RunConfig) -> Outcome<()> {
    let analyses = analyze_dn_family(cfg.r1, &cfg.ratios, cfg.s_points, cfg.resolution, cfg.tol)?;
    let bracket = if cfg.bisect {
        let lo = cfg.ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cfg.ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(bisect_critical_ratio(cfg.r1, lo, hi, cfg.bisect_width, cfg.s_points, cfg.resolution, cfg.tol)?)
    } else {
        None
    };
    let mut csv = String::from("ratio,s,nu1\n");
    for a in &analyses {
        println!("ratio {}: {:?}, s0 = {:?}", a.ratio, a.class, a.s0);
        for (s, v) in &a.samples {
            csv.push_str(&format!("{},{},{}\n", num(a.ratio), num(*s), num(*v)));
        }
    }
    if let Some(b) = &bracket {
        println!("critical ratio in ({}, {}), conclusive {}", b.lower, b.upper, b.conclusive);
    }
    write_text(&cfg.out.join("dn_samples.csv"), &csv)?;
    write_json(
        &cfg.out.join("dn_analysis.json"),
        &json!({ "config": cfg, "analyses": analyses, "bracket": bracket }),
    )?;
    if cfg.svg {
        let series: Vec<Series> = analyses
            .iter()
            .map(|a| Series::new(format!("ratio {}", a.ratio), a.samples.clone()))
            .collect();
        write_text(&cfg.out.join("dn_profiles.svg"), &line_chart_svg("nu1 profiles", "s", "nu1", &series)?)?;
    }
    let inconclusive = analyses.iter().any(|a| a.class == DnClass::Inconclusive)
        || bracket.as_ref().is_some_and(|b| !b.conclusive);
    if inconclusive {
        Err(Failure::Assertion("inconclusive DN classification".into()))
    } else {
        Ok(())
    }
}

fn cmd_converge(cfg: &RunConfig) -> Outcome<()> {
    let study = convergence_study(&domain(cfg)?, cfg.kind, cfg.resolution, cfg.levels, cfg.tol)?;
    println!("n_theta,n_rad,h,value,oracle_error,oracle_order,observed_order,extrapolated");
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for r in &study.rows {
        println!(
            "{},{},{},{},{},{},{},{}",
            r.n_theta,
            r.n_rad,
            num(r.h),
            num(r.value),
            opt(r.oracle_error),
            opt(r.oracle_order),
            opt(r.observed_order),
            opt(r.extrapolated)
        );
    }
    write_json(&cfg.out.join("convergence.json"), &json!({ "config": cfg, "study": study }))?;
    let mut failed = Vec::new();
    if !study.monotone {
        failed.push("values not monotone under refinement".to_string());
    }
    if let Some(p) = study.rows.last().and_then(|r| r.oracle_order) {
        if !(1.7..=2.3).contains(&p) {
            failed.push(format!("observed order {p} outside [1.7, 2.3]"));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion(failed.join(", ")))
    }
}

fn execute(command: Command) -> Outcome<()> {
    let (opts, f): (Opts, fn(&RunConfig) -> Outcome<()>) = match command {
        Command::Solve(o) => (o, cmd_solve),
        Command::Torsion(o) => (o, cmd_torsion),
        Command::SymmetryCheck(o) => (o, cmd_symmetry),
        Command::ShapeDerivative(o) => (o, cmd_shape),
        Command::Sweep(o) => (o, cmd_sweep),
        Command::DnAnalyze(o) => (o, cmd_dn),
        Command::Converge(o) => (o, cmd_converge),
    };
    let cfg = resolve(opts)?;
    if let Some(n) = cfg.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    f(&cfg)
}

fn run(argv: impl IntoIterator<Item = OsString>) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("{}", f.message());
            f.code()
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(args: &[&str]) -> Opts {
        let mut argv = vec!["zaremba", "solve"];
        argv.extend_from_slice(args);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Solve(o) => o,
            _ => unreachable!(),
        }
    }

    #[test]
    fn defaults_resolve() {
        let cfg = resolve(opts(&[])).unwrap();
        assert_eq!((cfg.r0, cfg.r1, cfg.s), (1.0, 5.0, 0.0));
        assert_eq!(cfg.resolution, Resolution::BASELINE);
        assert_eq!(cfg.s_grid.len(), 10);
        assert_eq!(cfg.kind, ProblemKind::ND);
        assert_eq!(cfg.ratios, vec![0.1, 0.6]);
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"R0": 2.0, "R1": 6.0, "n-theta": 64, "kind": "dd"}"#).unwrap();
        let cfg = resolve(opts(&["--config", path.to_str().unwrap(), "--R1", "7"])).unwrap();
        assert_eq!(cfg.r0, 2.0);
        assert_eq!(cfg.r1, 7.0);
        assert_eq!(cfg.resolution.n_theta, 64);
        assert_eq!(cfg.kind, ProblemKind::DD);
    }

    #[test]
    fn bad_config_key_is_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"radius": 2.0}"#).unwrap();
        let err = resolve(opts(&["--config", path.to_str().unwrap()])).unwrap_err();
        assert_eq!(err.code(), EXIT_VALIDATION);
    }

    #[test]
    fn invalid_domain_is_validation_error() {
        let err = resolve(opts(&["--R0", "1", "--R1", "0.5"])).unwrap_err();
        assert_eq!(err.code(), EXIT_VALIDATION);
        assert!(err.message().contains("R0"));
        let err = resolve(opts(&["--kind", "xy"])).unwrap_err();
        assert_eq!(err.code(), EXIT_VALIDATION);
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        let nc = Failure::Core(Error::AtOffset {
            s: 1.0,
            source: Box::new(Error::NonConvergence {
                iterations: 3,
                residual: 1.0,
            }),
        });
        assert_eq!(nc.code(), EXIT_NONCONVERGENCE);
        assert_eq!(Failure::Assertion("x".into()).code(), EXIT_ASSERTION);
    }
}
