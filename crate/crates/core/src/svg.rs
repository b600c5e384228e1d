//! Minimal SVG documents: log-log plots and the disk chart of a path.

use std::fmt::Write;

use crate::hgeom::DPoint;

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 56.0;

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(out: &mut String, pts: &[(f64, f64)], stroke: &str, width: f64, dash: bool) {
    let mut d = String::new();
    for (i, (x, y)) in pts.iter().enumerate() {
        let _ = write!(d, "{}{x:.2},{y:.2}", if i == 0 { "" } else { " " });
    }
    let dash = if dash { " stroke-dasharray=\"5,4\"" } else { "" };
    let _ = writeln!(
        out,
        "<polyline points=\"{d}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{width}\"{dash}/>"
    );
}

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn fit(xs: &[f64], ys: &[f64]) -> Axes {
        let lx: Vec<f64> = xs.iter().map(|v| v.log10()).collect();
        let ly: Vec<f64> = ys.iter().filter(|v| **v > 0.0).map(|v| v.log10()).collect();
        let lo = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min).floor();
        let hi = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
        let (mut x0, mut x1, mut y0, mut y1) = (lo(&lx), hi(&lx), lo(&ly), hi(&ly));
        if !(x1 > x0) {
            x0 -= 1.0;
            x1 += 1.0;
        }
        if !(y1 > y0) {
            y0 -= 1.0;
            y1 += 1.0;
        }
        Axes { x0, x1, y0, y1 }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let px = MARGIN + (x.log10() - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN);
        let py = H - MARGIN - (y.log10() - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN);
        (px, py)
    }

    fn draw(&self, out: &mut String, title: &str, xlabel: &str) {
        let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
        let _ = writeln!(out, "<rect x=\"{l}\" y=\"{t}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>", r - l, b - t);
        for e in self.x0 as i32..=self.x1 as i32 {
            let (px, _) = self.map(10f64.powi(e), 10f64.powf(self.y0));
            let _ = writeln!(out, "<text x=\"{px:.2}\" y=\"{}\" text-anchor=\"middle\">1e{e}</text>", b + 16.0);
        }
        for e in self.y0 as i32..=self.y1 as i32 {
            let (_, py) = self.map(10f64.powf(self.x0), 10f64.powi(e));
            let _ = writeln!(out, "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">1e{e}</text>", l - 4.0, py + 4.0);
        }
        let _ = writeln!(out, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\">{}</text>", W / 2.0, escape(title));
        let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", W / 2.0, H - 12.0, escape(xlabel));
    }
}

fn markers(out: &mut String, pts: &[(f64, f64)], fill: &str) {
    for (x, y) in pts {
        let _ = writeln!(out, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3.5\" fill=\"{fill}\"/>");
    }
}

/// Points `(x, y)` on log-log axes, optionally with a dashed reference line
/// of the given slope through the first point.
pub fn loglog_plot(title: &str, xlabel: &str, xs: &[f64], ys: &[f64], ref_slope: Option<f64>) -> String {
    let mut out = header(W, H);
    let ax = Axes::fit(xs, ys);
    ax.draw(&mut out, title, xlabel);
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(&x, &y)| ax.map(x, y)).collect();
    polyline(&mut out, &pts, "#1f4e9c", 1.5, false);
    markers(&mut out, &pts, "#1f4e9c");
    if let (Some(s), Some(&x0), Some(&y0)) = (ref_slope, xs.first(), ys.first()) {
        let line: Vec<(f64, f64)> = xs.iter().map(|&x| ax.map(x, y0 * (x / x0).powf(s))).collect();
        polyline(&mut out, &line, "#888888", 1.0, true);
    }
    out.push_str("</svg>\n");
    out
}

/// Measured points with a dashed fitted curve on log-log axes.
pub fn loglog_overlay(title: &str, xlabel: &str, xs: &[f64], ys: &[f64], fitted: &[f64]) -> String {
    let mut out = header(W, H);
    let all: Vec<f64> = ys.iter().chain(fitted).copied().collect();
    let all_x: Vec<f64> = xs.iter().chain(xs).copied().collect();
    let ax = Axes::fit(&all_x, &all);
    ax.draw(&mut out, title, xlabel);
    let fit: Vec<(f64, f64)> = xs.iter().zip(fitted).map(|(&x, &y)| ax.map(x, y)).collect();
    polyline(&mut out, &fit, "#888888", 1.0, true);
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(&x, &y)| ax.map(x, y)).collect();
    markers(&mut out, &pts, "#1f4e9c");
    out.push_str("</svg>\n");
    out
}

/// Disk chart with a Brownian trace, a walk drawn as vertices joined by
/// chords, and a boundary mark.
pub fn disk_chart(trace: &[DPoint], walk: &[DPoint], mark: DPoint) -> String {
    let size = 480.0;
    let c = size / 2.0;
    let r = c - 20.0;
    let map = |p: &DPoint| (c + r * p.u, c - r * p.v);
    let mut out = header(size, size);
    let _ = writeln!(out, "<circle cx=\"{c}\" cy=\"{c}\" r=\"{r}\" fill=\"none\" stroke=\"black\"/>");
    let tr: Vec<(f64, f64)> = trace.iter().map(map).collect();
    polyline(&mut out, &tr, "#9aa7b8", 0.6, false);
    let wk: Vec<(f64, f64)> = walk.iter().map(map).collect();
    polyline(&mut out, &wk, "#c0392b", 1.2, false);
    for (x, y) in &wk {
        let _ = writeln!(out, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2.5\" fill=\"#c0392b\"/>");
    }
    let (mx, my) = map(&mark);
    let _ = writeln!(out, "<circle cx=\"{mx:.2}\" cy=\"{my:.2}\" r=\"5\" fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"2\"/>");
    out.push_str("</svg>\n");
    out
}
