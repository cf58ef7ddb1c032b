use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{compute_phi_gap, GapSeries};
use crate::error::{Error, Result};
use crate::solvers::Trace;

pub const CSV_HEADER: &str =
    "method,k,time_s,phi_gap,omega,step_norm,phi,omega_x,phi_x,dist_x,subgrad_norm,eta,lk";

/// One exported iteration. `phi` and `omega` are taken at `y^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub method: String,
    pub k: usize,
    pub time_s: f64,
    pub phi_gap: f64,
    pub omega: f64,
    pub step_norm: f64,
    pub phi: f64,
    pub omega_x: f64,
    pub phi_x: f64,
    pub dist_x: Option<f64>,
    pub subgrad_norm: f64,
    pub eta: f64,
    pub lk: f64,
}

impl CsvRow {
    /// Rows for every iteration of `trace`, with the gap clamped as in
    /// [`compute_phi_gap`].
    pub fn from_trace(trace: &Trace, phi_star: f64) -> Result<Vec<CsvRow>> {
        let GapSeries { gap, .. } = compute_phi_gap(trace, phi_star)?;
        Ok(trace
            .records
            .iter()
            .zip(gap)
            .map(|(r, g)| CsvRow {
                method: trace.method.clone(),
                k: r.k,
                time_s: r.time_s,
                phi_gap: g,
                omega: r.omega_y,
                step_norm: r.omega_step_norm,
                phi: r.phi_y,
                omega_x: r.omega_x,
                phi_x: r.phi_x,
                dist_x: r.dist_x,
                subgrad_norm: r.subgrad_norm,
                eta: r.eta,
                lk: r.lk,
            })
            .collect())
    }
}

fn sorted(rows: &[CsvRow]) -> Vec<&CsvRow> {
    let mut v: Vec<&CsvRow> = rows.iter().collect();
    v.sort_by(|a, b| a.method.cmp(&b.method).then(a.k.cmp(&b.k)));
    v
}

/// Write rows sorted by `(method, k)`. Floats use the shortest representation
/// that parses back to the same value.
pub fn write_trace_csv(path: &Path, rows: &[CsvRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(CSV_HEADER.split(','))?;
    for row in sorted(rows) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            message: format!("unexpected header {:?}", header.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize().enumerate() {
        rows.push(rec.map_err(|e| Error::Parse {
            row: i + 2,
            column: match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.field().map_or(0, |f| f as usize + 1),
                _ => 0,
            },
            message: e.to_string(),
        })?);
    }
    Ok(rows)
}

pub fn write_summary_json<T: Serialize + ?Sized>(path: &Path, summary: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(summary)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;

fn by_method(rows: &[CsvRow]) -> BTreeMap<&str, Vec<&CsvRow>> {
    let mut m: BTreeMap<&str, Vec<&CsvRow>> = BTreeMap::new();
    for r in sorted(rows) {
        m.entry(r.method.as_str()).or_default().push(r);
    }
    m
}

fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#, WIDTH / 2.0);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{y_label}</text>"#,
        y = HEIGHT / 2.0
    );
    for (v, x, anchor) in [(x0, sx(x0), "start"), (x1, sx(x1), "end")] {
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{}" text-anchor="{anchor}">{v:.3e}</text>"#,
            HEIGHT - MARGIN + 16.0
        );
    }
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1))] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y:.1}" text-anchor="end">{v:.3e}</text>"#,
            MARGIN - 4.0
        );
    }
    for (i, (name, points)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-method="{name}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{name}</text>"#,
            WIDTH - MARGIN - 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// `log10(phi_gap)` against time, one polyline per method. Zero gaps are dropped.
pub fn write_phi_gap_svg(path: &Path, rows: &[CsvRow]) -> Result<()> {
    let series: Vec<(String, Vec<(f64, f64)>)> = by_method(rows)
        .into_iter()
        .map(|(m, rs)| {
            let pts = rs
                .iter()
                .filter(|r| r.phi_gap > 0.0)
                .map(|r| (r.time_s, r.phi_gap.log10()))
                .collect();
            (m.to_string(), pts)
        })
        .collect();
    fs::write(path, line_chart("optimality gap", "time [s]", "log10 gap", &series))?;
    Ok(())
}

/// Indices `0, 1, 2, 4, 8, ...` up to `n - 1`, always ending at `n - 1`.
fn geometric_indices(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    out.push(0);
    let mut i = 1;
    while i < n {
        out.push(i);
        i *= 2;
    }
    if *out.last().unwrap() != n - 1 {
        out.push(n - 1);
    }
    out
}

/// `omega(y^k)` against `-log10(phi_gap)` at geometrically spaced `k`.
pub fn write_omega_vs_gap_svg(path: &Path, rows: &[CsvRow]) -> Result<()> {
    let series: Vec<(String, Vec<(f64, f64)>)> = by_method(rows)
        .into_iter()
        .map(|(m, rs)| {
            let pts = geometric_indices(rs.len())
                .into_iter()
                .map(|i| rs[i])
                .filter(|r| r.phi_gap > 0.0)
                .map(|r| (-r.phi_gap.log10(), r.omega))
                .collect();
            (m.to_string(), pts)
        })
        .collect();
    fs::write(path, line_chart("outer value", "-log10 gap", "omega", &series))?;
    Ok(())
}
