//! Self-contained SVG figures: volume decay per δ and the state-plane trajectory with tubes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use sttmpc::geometry::HPolytope;
use sttmpc::simulator::Trace;
use sttmpc::tube_mpc::TubeDesign;

use crate::table::{delta_dir_name, load_groups, mean_and_se, VolumeGroup};
use crate::CliError;

const W: f64 = 760.0;
const H: f64 = 440.0;
const MARGIN: [f64; 4] = [60.0, 140.0, 30.0, 50.0]; // left, right, top, bottom
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    log_y: bool,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN[0] + (x - self.x.0) / (self.x.1 - self.x.0) * (W - MARGIN[0] - MARGIN[1])
    }

    fn py(&self, y: f64) -> f64 {
        let (lo, hi, v) = if self.log_y {
            (self.y.0.log10(), self.y.1.log10(), y.max(self.y.0).log10())
        } else {
            (self.y.0, self.y.1, y)
        };
        H - MARGIN[3] - (v - lo) / (hi - lo) * (H - MARGIN[2] - MARGIN[3])
    }

    fn points(&self, pts: impl IntoIterator<Item = (f64, f64)>) -> String {
        pts.into_iter()
            .map(|(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let raw = (hi - lo) / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn open_svg(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
    s
}

fn axes(s: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (l, r, t, b) = (MARGIN[0], W - MARGIN[1], MARGIN[2], H - MARGIN[3]);
    let _ = writeln!(s, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, r - l, b - t);
    for x in nice_ticks(f.x.0, f.x.1, 6) {
        let p = f.px(x);
        let _ = writeln!(s, r#"<line x1="{p:.2}" y1="{b}" x2="{p:.2}" y2="{}" stroke="black"/>"#, b + 5.0);
        let _ = writeln!(s, r#"<text x="{p:.2}" y="{}" text-anchor="middle">{x}</text>"#, b + 18.0);
    }
    let yticks: Vec<f64> = if f.log_y {
        let (a, c) = (f.y.0.log10().ceil() as i32, f.y.1.log10().floor() as i32);
        (a..=c).map(|e| 10f64.powi(e)).collect()
    } else {
        nice_ticks(f.y.0, f.y.1, 6)
    };
    for y in yticks {
        let p = f.py(y);
        let _ = writeln!(s, r#"<line x1="{}" y1="{p:.2}" x2="{l}" y2="{p:.2}" stroke="black"/>"#, l - 5.0);
        let _ = writeln!(s, r#"<line x1="{l}" y1="{p:.2}" x2="{r}" y2="{p:.2}" stroke="lightgray"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{y}</text>"#, l - 8.0, p + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, (l + r) / 2.0, H - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{0}" text-anchor="middle" transform="rotate(-90 14 {0})">{ylabel}</text>"#,
        (t + b) / 2.0
    );
}

/// Mean relative volume (percent, log scale) against t, with a ±1.96 standard-error band.
pub fn volume_svg(groups: &[VolumeGroup]) -> Option<String> {
    let groups: Vec<&VolumeGroup> = groups.iter().filter(|g| !g.runs.is_empty()).collect();
    if groups.is_empty() {
        return None;
    }
    let steps = groups.iter().flat_map(|g| g.runs.iter().map(Vec::len)).min().unwrap_or(0);
    if steps == 0 {
        return None;
    }
    let curves: Vec<Vec<(f64, f64)>> = groups
        .iter()
        .map(|g| (1..=steps).map(|t| mean_and_se(&g.runs, t)).collect())
        .collect();
    let ymin = curves
        .iter()
        .flatten()
        .map(|(m, s)| m - 1.96 * s)
        .filter(|v| *v > 0.0)
        .fold(100.0, f64::min);
    let f = Frame {
        x: (1.0, steps.max(2) as f64),
        y: (10f64.powf(ymin.log10().floor()), 100.0 * 1.5),
        log_y: true,
    };
    let mut s = open_svg("Average Vol(Θ_t) / Vol(Θ_0)");
    for (i, (g, c)) in groups.iter().zip(&curves).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let upper = c.iter().enumerate().map(|(k, (m, se))| ((k + 1) as f64, m + 1.96 * se));
        let lower = c.iter().enumerate().rev().map(|(k, (m, se))| ((k + 1) as f64, m - 1.96 * se));
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            f.points(upper.chain(lower))
        );
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            f.points(c.iter().enumerate().map(|(k, (m, _))| ((k + 1) as f64, *m)))
        );
        let ly = MARGIN[2] + 18.0 + 16.0 * i as f64;
        let lx = W - MARGIN[1] + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">δ = {:e}</text>"#, lx + 26.0, ly + 4.0, g.delta);
    }
    axes(&mut s, &f, "t", "volume [%]");
    s.push_str("</svg>\n");
    Some(s)
}

/// Vertices of the planar polygon `{x : T x ≤ α}` in counterclockwise order.
pub fn tube_polygon(t: &DMatrix<f64>, alpha: &DVector<f64>) -> Option<Vec<(f64, f64)>> {
    if t.ncols() != 2 {
        return None;
    }
    let poly = HPolytope::new(t.clone(), alpha.clone()).ok()?;
    let verts = poly.vertices().ok()?.vertices;
    let n = verts.len() as f64;
    let cx = verts.iter().map(|v| v[0]).sum::<f64>() / n;
    let cy = verts.iter().map(|v| v[1]).sum::<f64>() / n;
    let mut pts: Vec<(f64, f64)> = verts.iter().map(|v| (v[0], v[1])).collect();
    pts.sort_by(|a, b| (a.1 - cy).atan2(a.0 - cx).total_cmp(&(b.1 - cy).atan2(b.0 - cx)));
    Some(pts)
}

/// State trajectory, tube cross sections `X_{k|t}` for each selected `t`, and the
/// state constraint lines (rows of `F` whose `G` row is zero).
pub fn trajectory_svg(trace: &Trace, design: &TubeDesign, times: &[usize]) -> Option<String> {
    if trace.steps.is_empty() || trace.steps[0].x.len() != 2 {
        return None;
    }
    let xs: Vec<(f64, f64)> = trace.steps.iter().map(|s| (s.x[0], s.x[1])).collect();
    let polys: Vec<(usize, Vec<Vec<(f64, f64)>>)> = times
        .iter()
        .filter_map(|&t| trace.step(t).map(|s| (t, s)))
        .map(|(t, s)| (t, s.alpha.iter().filter_map(|a| tube_polygon(&design.t, a)).collect()))
        .collect();
    let all = xs.iter().chain(polys.iter().flat_map(|(_, p)| p.iter().flatten()));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let lines: Vec<(usize, f64)> = (0..design.f.nrows())
        .filter(|&i| design.g.row(i).amax() == 0.0)
        .filter_map(|i| {
            let row = design.f.row(i);
            let nz: Vec<usize> = (0..2).filter(|&j| row[j] != 0.0).collect();
            (nz.len() == 1).then(|| (nz[0], 1.0 / row[nz[0]]))
        })
        .collect();
    for &(axis, v) in &lines {
        if axis == 0 {
            x0 = x0.min(v);
            x1 = x1.max(v);
        } else {
            y0 = y0.min(v);
            y1 = y1.max(v);
        }
    }
    let pad = |a: f64, b: f64| 0.05 * (b - a).max(1e-6);
    let f = Frame {
        x: (x0 - pad(x0, x1), x1 + pad(x0, x1)),
        y: (y0 - pad(y0, y1), y1 + pad(y0, y1)),
        log_y: false,
    };
    let mut s = open_svg("State trajectory and tubes");
    for (i, (t, ps)) in polys.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(s, r#"<g stroke="{color}" fill="{color}" fill-opacity="0.08" data-t="{t}">"#);
        for p in ps {
            let _ = writeln!(s, r#"<polygon points="{}"/>"#, f.points(p.iter().copied()));
        }
        s.push_str("</g>\n");
        let ly = MARGIN[2] + 18.0 + 16.0 * i as f64;
        let lx = W - MARGIN[1] + 12.0;
        let _ = writeln!(s, r#"<rect x="{lx}" y="{}" width="14" height="10" fill="{color}" fill-opacity="0.4"/>"#, ly - 8.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">tube at t = {t}</text>"#, lx + 20.0, ly + 2.0);
    }
    for &(axis, v) in &lines {
        let (a, b) = if axis == 0 {
            ((v, f.y.0), (v, f.y.1))
        } else {
            ((f.x.0, v), (f.x.1, v))
        };
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-dasharray="6 4"/>"#,
            f.px(a.0),
            f.py(a.1),
            f.px(b.0),
            f.py(b.1)
        );
    }
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1.2"/>"#,
        f.points(xs.iter().copied())
    );
    for &(x, y) in &xs {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="black"/>"#, f.px(x), f.py(y));
    }
    axes(&mut s, &f, "x1", "x2");
    s.push_str("</svg>\n");
    Some(s)
}

/// Write `plots/volume.svg` and `plots/trajectory.svg` for the run directory `dir`.
/// The trajectory uses the smallest seed at the largest δ.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let groups = load_groups(dir)?;
    let mut written = Vec::new();
    let plots = dir.join("plots");
    match volume_svg(&groups) {
        Some(svg) => {
            std::fs::create_dir_all(&plots)?;
            let p = plots.join("volume.svg");
            std::fs::write(&p, svg)?;
            written.push(p);
        }
        None => {
            log::warn!("no traces under {}; skipping plots", dir.display());
            return Ok(written);
        }
    }
    let design_path = dir.join("design.json");
    let design: TubeDesign = match std::fs::read_to_string(&design_path) {
        Ok(text) => serde_json::from_str(&text)?,
        Err(_) => {
            log::warn!("{} missing; skipping trajectory plot", design_path.display());
            return Ok(written);
        }
    };
    let delta = groups.iter().map(|g| g.delta).fold(f64::NEG_INFINITY, f64::max);
    let tdir = dir.join("traces").join(delta_dir_name(delta));
    let mut seeds: Vec<u64> = std::fs::read_dir(&tdir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_prefix("seed_")?.strip_suffix(".json")?.parse().ok()
        })
        .collect();
    seeds.sort_unstable();
    let Some(seed) = seeds.first() else {
        log::warn!("no trace JSON under {}; skipping trajectory plot", tdir.display());
        return Ok(written);
    };
    let trace: Trace = serde_json::from_str(&std::fs::read_to_string(tdir.join(format!("seed_{seed}.json")))?)?;
    let times: Vec<usize> = [1, 5, 20].into_iter().filter(|&t| t <= trace.steps.len()).collect();
    match trajectory_svg(&trace, &design, &times) {
        Some(svg) => {
            let p = plots.join("trajectory.svg");
            std::fs::write(&p, svg)?;
            written.push(p);
        }
        None => log::warn!("trajectory plot needs a two-dimensional state; skipped"),
    }
    Ok(written)
}
