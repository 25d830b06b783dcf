//! CSV tables and minimal standalone SVG plots.

use std::fmt::Write as _;

use crate::integrate::Trajectory;
use crate::ivlab::{BranchTag, IvCurve};
use crate::phase::{AmplitudePoint, BifurcationDiagram, EquilibriumReport, NullclineCurves};

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Columns: `time`, one per state variable, `current`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("time");
    for name in &traj.state_names {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",current\n");
    for ((t, s), i) in traj.times.iter().zip(&traj.states).zip(&traj.currents) {
        out.push_str(&fmt_f64(*t));
        for x in s {
            out.push(',');
            out.push_str(&fmt_f64(*x));
        }
        out.push(',');
        out.push_str(&fmt_f64(*i));
        out.push('\n');
    }
    out
}

/// Columns: `v`, `fast`, `slow`; empty cells are gaps.
pub fn nullclines_csv(curves: &NullclineCurves) -> String {
    let mut out = String::from("v,fast,slow\n");
    for ((v, f), s) in curves.v.iter().zip(&curves.fast).zip(&curves.slow) {
        let _ = writeln!(out, "{},{},{}", fmt_f64(*v), opt(*f), opt(*s));
    }
    out
}

fn eig_header(out: &mut String, dim: usize) {
    for k in 0..dim {
        let _ = write!(out, ",eig{k}_re,eig{k}_im");
    }
}

fn eig_cells(out: &mut String, e: &EquilibriumReport) {
    for ev in &e.eigenvalues {
        let _ = write!(out, ",{},{}", fmt_f64(ev.re), fmt_f64(ev.im));
    }
}

fn branch_name(e: &EquilibriumReport) -> String {
    e.branch
        .map(|b| serde_json::to_value(b).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default())
        .unwrap_or_default()
}

/// Columns: `current`, state variables, `class`, eigenvalue pairs,
/// `branch`, `residual`.
pub fn equilibria_csv(state_names: &[&str], current: f64, reports: &[EquilibriumReport]) -> String {
    let mut out = String::from("current");
    for n in state_names {
        out.push(',');
        out.push_str(n);
    }
    out.push_str(",class");
    eig_header(&mut out, state_names.len());
    out.push_str(",branch,residual\n");
    for e in reports {
        out.push_str(&fmt_f64(current));
        for x in &e.state {
            let _ = write!(out, ",{}", fmt_f64(*x));
        }
        let _ = write!(out, ",{}", csv_text(e.class.name()));
        eig_cells(&mut out, e);
        let _ = writeln!(out, ",{},{}", branch_name(e), fmt_f64(e.residual));
    }
    out
}

/// One row per (current, equilibrium): `current`, `v_eq`, `class`,
/// `stable`, `cycle_min`, `cycle_max`, `error`. Points without equilibria
/// get a row with empty equilibrium cells.
pub fn bifurcation_csv(diagram: &BifurcationDiagram) -> String {
    let mut out = String::from("current,v_eq,class,stable,cycle_min,cycle_max,error\n");
    for p in &diagram.points {
        let (lo, hi) = p.envelope.map_or((None, None), |(a, b)| (Some(a), Some(b)));
        let err = p.error.as_deref().map(csv_text).unwrap_or_default();
        if p.equilibria.is_empty() {
            let _ = writeln!(out, "{},,,,{},{},{}", fmt_f64(p.current), opt(lo), opt(hi), err);
        }
        for e in &p.equilibria {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt_f64(p.current),
                fmt_f64(e.state[0]),
                csv_text(e.class.name()),
                e.class.is_stable(),
                opt(lo),
                opt(hi),
                err
            );
        }
    }
    out
}

/// Columns: `current`, `bracket_low`, `bracket_high`, `refined`.
pub fn hopf_csv(diagram: &BifurcationDiagram) -> String {
    let mut out = String::from("current,bracket_low,bracket_high,refined\n");
    for h in &diagram.hopf {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(h.current),
            fmt_f64(h.bracket.0),
            fmt_f64(h.bracket.1),
            h.refined
        );
    }
    out
}

/// Columns: `current`, `peak_to_peak`, `spike_count`, `error`.
pub fn amplitude_csv(points: &[AmplitudePoint]) -> String {
    let mut out = String::from("current,peak_to_peak,spike_count,error\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(p.current),
            opt(p.peak_to_peak),
            p.spike_count.map(|n| n.to_string()).unwrap_or_default(),
            p.error.as_deref().map(csv_text).unwrap_or_default()
        );
    }
    out
}

fn tag_name(t: BranchTag) -> &'static str {
    match t {
        BranchTag::Forward => "forward",
        BranchTag::Reverse => "reverse",
    }
}

/// Columns: `branch`, `v`, `i`, `r`.
pub fn iv_csv(curve: &IvCurve) -> String {
    let mut out = String::from("branch,v,i,r\n");
    for (tag, s) in curve.samples() {
        let _ = writeln!(out, "{},{},{},{}", tag_name(tag), fmt_f64(s.v), opt(s.i), opt(s.r));
    }
    out
}

// ---------------------------------------------------------------------------
// SVG

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Style {
    Line,
    /// Filled circles for stable points, hollow for unstable ones.
    Markers { filled: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub style: Style,
    /// `None` breaks a polyline.
    pub points: Vec<Option<(f64, f64)>>,
}

impl Series {
    pub fn line(label: impl Into<String>, color: &'static str, points: Vec<Option<(f64, f64)>>) -> Self {
        Series {
            label: label.into(),
            color,
            style: Style::Line,
            points,
        }
    }

    pub fn markers(label: impl Into<String>, color: &'static str, filled: bool, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            color,
            style: Style::Markers { filled },
            points: points.into_iter().map(Some).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, 6);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn tick_label(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 1e4 || x.abs() < 1e-2 {
        format!("{x:.2e}")
    } else {
        let s = format!("{x:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    }
}

fn bounds(plot: &Plot) -> ((f64, f64), (f64, f64)) {
    let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in plot.series.iter().flat_map(|s| s.points.iter().flatten()) {
        if x.is_finite() && y.is_finite() {
            xs = (xs.0.min(*x), xs.1.max(*x));
            ys = (ys.0.min(*y), ys.1.max(*y));
        }
    }
    let pad = |(a, b): (f64, f64)| {
        if !a.is_finite() {
            (0.0, 1.0)
        } else if a == b {
            let d = if a == 0.0 { 1.0 } else { 0.05 * a.abs() };
            (a - d, b + d)
        } else {
            let d = 0.03 * (b - a);
            (a - d, b + d)
        }
    };
    (pad(xs), pad(ys))
}

/// Render a standalone SVG document.
pub fn render_svg(plot: &Plot) -> String {
    let ((x0, x1), (y0, y1)) = bounds(plot);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(&plot.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{b2}" stroke="black"/><text x="{x:.2}" y="{ty}" text-anchor="middle">{}</text>"#,
            tick_label(t),
            b = TOP + ph,
            b2 = TOP + ph + 5.0,
            ty = TOP + ph + 18.0
        );
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(
            s,
            r#"<line x1="{l2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{tx}" y="{ty:.2}" text-anchor="end">{}</text>"#,
            tick_label(t),
            l2 = LEFT - 5.0,
            tx = LEFT - 8.0,
            ty = y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{cy}" text-anchor="middle" transform="rotate(-90 18 {cy})">{}</text>"#,
        escape(&plot.y_label),
        cy = TOP + ph / 2.0
    );

    for series in &plot.series {
        match series.style {
            Style::Line => {
                let mut run: Vec<String> = Vec::new();
                let flush = |run: &mut Vec<String>, s: &mut String| {
                    if run.len() >= 2 {
                        let _ = writeln!(
                            s,
                            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                            series.color,
                            run.join(" ")
                        );
                    }
                    run.clear();
                };
                for p in &series.points {
                    match p {
                        Some((x, y)) if x.is_finite() && y.is_finite() => {
                            run.push(format!("{:.2},{:.2}", sx(*x), sy(*y)));
                        }
                        _ => flush(&mut run, &mut s),
                    }
                }
                flush(&mut run, &mut s);
            }
            Style::Markers { filled } => {
                let fill = if filled { series.color } else { "white" };
                for (x, y) in series.points.iter().flatten() {
                    if x.is_finite() && y.is_finite() {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{fill}" stroke="{}"/>"#,
                            sx(*x),
                            sy(*y),
                            series.color
                        );
                    }
                }
            }
        }
    }

    for (k, series) in plot.series.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * k as f64;
        let x = LEFT + pw - 150.0;
        match series.style {
            Style::Line => {
                let _ = writeln!(
                    s,
                    r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/>"#,
                    x + 20.0,
                    series.color
                );
            }
            Style::Markers { filled } => {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{}" cy="{y}" r="3" fill="{}" stroke="{}"/>"#,
                    x + 10.0,
                    if filled { series.color } else { "white" },
                    series.color
                );
            }
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x + 26.0, y + 4.0, escape(&series.label));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1e-20, -3.266, 123456789.123, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn ticks_cover_range() {
        let t = ticks(-0.03, 1.03);
        assert_eq!(t.first(), Some(&0.0));
        assert!((t.last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svg_breaks_lines_at_gaps() {
        let plot = Plot {
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series::line(
                "s",
                "black",
                vec![Some((0.0, 0.0)), Some((1.0, 1.0)), None, Some((2.0, 0.0)), Some((3.0, 1.0))],
            )],
        };
        let svg = render_svg(&plot);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
