//! Plain-text exports: field CSV, legacy VTK, SVG line charts, ring CSV.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::Field;
use crate::symmetrize::RingSampling;

/// Shortest round-trip text of `v`, scientific outside `[1e-4, 1e15)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn field_csv(u: &Field) -> String {
    let mut out = String::from("x,y,u\n");
    for (p, v) in u.mesh().vertices().iter().zip(u.values()) {
        let _ = writeln!(out, "{},{},{}", num(p.x), num(p.y), num(*v));
    }
    out
}

/// Legacy ASCII VTK 2.0 unstructured grid with the field as point scalars.
pub fn field_vtk(u: &Field, name: &str) -> String {
    let mesh = u.mesh();
    let verts = mesh.vertices();
    let tris = mesh.triangles();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 2.0\n");
    let _ = writeln!(out, "{name}");
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", verts.len());
    for p in verts {
        let _ = writeln!(out, "{} {} 0", num(p.x), num(p.y));
    }
    let _ = writeln!(out, "CELLS {} {}", tris.len(), 4 * tris.len());
    for t in tris {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {}", tris.len());
    for _ in tris {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "POINT_DATA {}", verts.len());
    let _ = writeln!(out, "SCALARS {} double 1", sanitize(name));
    out.push_str("LOOKUP_TABLE default\n");
    for v in u.values() {
        let _ = writeln!(out, "{}", num(*v));
    }
    out
}

fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "u".into()
    } else {
        s
    }
}

/// Ring samples as `r,psi,value`, one row per sample.
pub fn rings_csv(rs: &RingSampling) -> String {
    let mut out = String::from("r,psi,value\n");
    for (r, ring) in rs.radii.iter().zip(&rs.values) {
        for (q, v) in ring.iter().enumerate() {
            let psi = 2.0 * std::f64::consts::PI * q as f64 / rs.m as f64;
            let _ = writeln!(out, "{},{},{}", num(*r), num(psi), num(*v));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
        }
    }
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// SVG 1.1 line chart of one or more series sharing the axes.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<String> {
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if pts.is_empty() {
        return Err(Error::InvalidParameter("chart needs at least one point".into()));
    }
    if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidParameter("chart data must be finite".into()));
    }
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (80.0, 20.0, 40.0, 60.0);
    let span = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let (x0, x1) = span(
        pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = span(
        pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(out, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        h - bottom,
        w - right,
        h - bottom
    );
    let _ = writeln!(
        out,
        "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\" stroke=\"black\"/>",
        h - bottom
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = x0 + t * (x1 - x0);
        let yv = y0 + t * (y1 - y0);
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{:.4}</text>",
            px(xv),
            h - bottom + 16.0,
            xv
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\">{:.5}</text>",
            left - 6.0,
            py(yv) + 4.0,
            yv
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
        (left + w - right) / 2.0,
        h - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 {})\">{}</text>",
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0,
        escape(y_label)
    );
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            path.join(" ")
        );
        for &(x, y) in &s.points {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>",
                px(x),
                py(y)
            );
        }
        let ly = top + 16.0 * k as f64 + 8.0;
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{ly}\" text-anchor=\"end\" font-size=\"12\" fill=\"{color}\">{}</text>",
            w - right - 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AnnularDomain;
    use crate::mesh::{Mesh, Resolution};
    use std::sync::Arc;

    fn field() -> Field {
        let d = AnnularDomain::new(1.0, 2.0, 0.3).unwrap();
        let mesh = Arc::new(Mesh::build(&d, Resolution::new(16, 4, 1.0).unwrap()).unwrap());
        Field::from_fn(mesh, |p| p.x + 2.0 * p.y)
    }

    #[test]
    fn number_text_roundtrips() {
        for v in [0.0, -0.0, 1.0, 0.1, 6.2e-17, -3.5e20, 1234.5678, 1e-4] {
            assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(num(6.25e-17), "6.25e-17");
        assert_eq!(num(0.4), "0.4");
    }

    #[test]
    fn vtk_counts() {
        let u = field();
        let vtk = field_vtk(&u, "tau field");
        let nv = u.mesh().vertex_count();
        let nt = u.mesh().triangles().len();
        assert!(vtk.starts_with("# vtk DataFile Version 2.0\n"));
        assert!(vtk.contains(&format!("POINTS {nv} double")));
        assert!(vtk.contains(&format!("CELLS {nt} {}", 4 * nt)));
        assert!(vtk.contains("SCALARS tau_field double 1"));
        assert_eq!(vtk.lines().filter(|l| *l == "5").count(), nt);
    }

    #[test]
    fn csv_rows_roundtrip() {
        let u = field();
        let csv = field_csv(&u);
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "x,y,u");
        assert_eq!(rows.len(), u.mesh().vertex_count() + 1);
        for (k, row) in rows[1..].iter().enumerate() {
            let v: Vec<f64> = row.split(',').map(|t| t.parse().unwrap()).collect();
            assert_eq!(v[2], u.value(k));
        }
    }

    #[test]
    fn svg_is_well_formed() {
        let s = Series::new("tau<1>", vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.2)]);
        let svg = line_chart_svg("t", "s", "y", &[s]).unwrap();
        assert!(svg.contains("version=\"1.1\""));
        assert!(svg.contains("tau&lt;1&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(line_chart_svg("t", "s", "y", &[]).is_err());
    }
}
