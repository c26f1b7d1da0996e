//! Small deterministic SVG writers. Every number is printed with a fixed
//! precision so identical data gives identical bytes.

use std::fmt::Write;

use crate::error::{CliError, CliResult};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 78.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const MAX_POINTS: usize = 4000;

pub struct Labels<'a> {
    pub title: &'a str,
    pub x: &'a str,
    pub y: &'a str,
}

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    plot_right: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let pad = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, b + 0.5) };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Frame { x0, x1, y0, y1, plot_right: W - RIGHT }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (self.plot_right - LEFT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn tick_label(v: f64, step: f64) -> String {
    let digits = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{:.*}", digits, v);
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn ticks(a: f64, b: f64) -> (Vec<f64>, f64) {
    let step = tick_step(b - a);
    let first = (a / step).ceil() as i64;
    let last = (b / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), step)
}

fn open(out: &mut String, labels: &Labels, f: &Frame) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        W / 2.0,
        escape(labels.title)
    );
    let (bx, by) = (LEFT, TOP);
    let (bw, bh) = (f.plot_right - LEFT, H - TOP - BOTTOM);
    let _ = writeln!(out, "<rect x=\"{bx:.1}\" y=\"{by:.1}\" width=\"{bw:.1}\" height=\"{bh:.1}\" fill=\"none\" stroke=\"black\"/>");
    let (xt, xs) = ticks(f.x0, f.x1);
    for x in xt {
        let p = f.px(x);
        let _ = writeln!(
            out,
            "<line x1=\"{p:.2}\" y1=\"{:.1}\" x2=\"{p:.2}\" y2=\"{:.1}\" stroke=\"black\"/><text x=\"{p:.2}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            H - BOTTOM,
            H - BOTTOM + 5.0,
            H - BOTTOM + 18.0,
            tick_label(x, xs)
        );
    }
    let (yt, ys) = ticks(f.y0, f.y1);
    for y in yt {
        let p = f.py(y);
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{p:.2}\" x2=\"{LEFT:.1}\" y2=\"{p:.2}\" stroke=\"black\"/><text x=\"{:.1}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            LEFT - 5.0,
            LEFT - 8.0,
            p + 4.0,
            tick_label(y, ys)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        (LEFT + f.plot_right) / 2.0,
        H - 14.0,
        escape(labels.x)
    );
    let _ = writeln!(
        out,
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">{}</text>",
        (TOP + H - BOTTOM) / 2.0,
        (TOP + H - BOTTOM) / 2.0,
        escape(labels.y)
    );
}

fn bounds<'a>(pts: impl Iterator<Item = &'a (f64, f64)>) -> Option<(f64, f64, f64, f64)> {
    pts.filter(|(x, y)| x.is_finite() && y.is_finite()).fold(None, |acc, &(x, y)| {
        Some(match acc {
            None => (x, x, y, y),
            Some((a, b, c, d)) => (a.min(x), b.max(x), c.min(y), d.max(y)),
        })
    })
}

/// One polyline per series with a legend when there is more than one.
pub fn line_plot(labels: &Labels, series: &[Series]) -> CliResult<String> {
    let (x0, x1, y0, y1) = bounds(series.iter().flat_map(|s| s.points.iter()))
        .ok_or_else(|| CliError::Plot(format!("no finite data for `{}`", labels.title)))?;
    let f = Frame::new(x0, x1, y0, y1);
    let mut out = String::new();
    open(&mut out, labels, &f);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let stride = s.points.len().div_ceil(MAX_POINTS).max(1);
        let pts: Vec<String> = s
            .points
            .iter()
            .step_by(stride)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
            .collect();
        let _ = writeln!(out, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\"{}\"/>", pts.join(" "));
        if series.len() > 1 {
            let ly = TOP + 14.0 + 16.0 * i as f64;
            let lx = f.plot_right - 120.0;
            let _ = writeln!(
                out,
                "<line x1=\"{lx:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                escape(s.label)
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Vertical stems from zero, e.g. spectral lines.
pub fn stem_plot(labels: &Labels, points: &[(f64, f64)]) -> CliResult<String> {
    let (x0, x1, _, y1) =
        bounds(points.iter()).ok_or_else(|| CliError::Plot(format!("no finite data for `{}`", labels.title)))?;
    let f = Frame::new(x0.min(0.0), x1 * 1.05, 0.0, y1 * 1.05);
    let mut out = String::new();
    open(&mut out, labels, &f);
    for &(x, y) in points {
        let (px, py, base) = (f.px(x), f.py(y), f.py(0.0));
        let _ = writeln!(
            out,
            "<line x1=\"{px:.2}\" y1=\"{base:.2}\" x2=\"{px:.2}\" y2=\"{py:.2}\" stroke=\"{}\"/><circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"2.5\" fill=\"{}\"/>",
            PALETTE[0], PALETTE[0]
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Blue-white-red ramp on `t ∈ [0, 1]`.
fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let stops = [(49.0, 54.0, 149.0), (255.0, 255.0, 255.0), (165.0, 0.0, 38.0)];
    let (a, b, u) = if t < 0.5 { (stops[0], stops[1], t * 2.0) } else { (stops[1], stops[2], t * 2.0 - 1.0) };
    let mix = |p: f64, q: f64| (p + (q - p) * u).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn colorbar(out: &mut String, lo: f64, hi: f64, unit: &str) {
    let x = W - RIGHT - 14.0;
    let (top, bottom) = (TOP, H - BOTTOM);
    let n = 32;
    let h = (bottom - top) / n as f64;
    for k in 0..n {
        let y = bottom - (k + 1) as f64 * h;
        let _ = writeln!(out, "<rect x=\"{x:.1}\" y=\"{y:.2}\" width=\"14\" height=\"{:.2}\" fill=\"{}\"/>", h + 0.2, color((k as f64 + 0.5) / n as f64));
    }
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"10\">{}</text>", x + 14.0, top - 4.0, format_value(hi));
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"10\">{}</text>", x + 14.0, bottom + 12.0, format_value(lo));
    if !unit.is_empty() {
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"10\">{}</text>", x - 4.0, top - 4.0, escape(unit));
    }
}

fn format_value(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Periodic field sampled on an `l×l` grid (row = first coordinate) drawn
/// over `cells × cells` copies of the unit cell `[0, 2π)²`.
pub fn torus_heat_map(labels: &Labels, l: usize, grid: &[f64], cells: usize) -> CliResult<String> {
    if l == 0 || grid.len() != l * l {
        return Err(CliError::Plot(format!("empty or ragged grid for `{}`", labels.title)));
    }
    let (lo, hi) = grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let two_pi = std::f64::consts::TAU;
    let extent = two_pi * cells as f64;
    let mut f = Frame::new(0.0, extent, 0.0, extent);
    f.plot_right = W - RIGHT - 50.0;
    let mut out = String::new();
    open(&mut out, labels, &f);
    let s = l.min(32);
    let stride = l / s;
    let cw = (f.px(two_pi / s as f64) - f.px(0.0)).abs();
    let ch = (f.py(0.0) - f.py(two_pi / s as f64)).abs();
    for cx in 0..cells {
        for cy in 0..cells {
            for i in 0..s {
                for j in 0..s {
                    let v = grid[i * stride * l + j * stride];
                    let x = two_pi * (cx as f64 + i as f64 / s as f64);
                    let y = two_pi * (cy as f64 + (j + 1) as f64 / s as f64);
                    let _ = writeln!(
                        out,
                        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                        f.px(x),
                        f.py(y),
                        cw + 0.3,
                        ch + 0.3,
                        color((v - lo) / span)
                    );
                }
            }
        }
    }
    colorbar(&mut out, lo, hi, "");
    out.push_str("</svg>\n");
    Ok(out)
}

/// `log10` amplitudes on the integer lattice, floored at `floor`.
pub fn lattice_map(labels: &Labels, entries: &[(i64, i64, f64)], floor: f64) -> CliResult<String> {
    if entries.is_empty() {
        return Err(CliError::Plot(format!("no lattice entries for `{}`", labels.title)));
    }
    let k = entries.iter().map(|e| e.0.abs().max(e.1.abs())).max().unwrap_or(0) as f64;
    let mut f = Frame::new(-k - 0.5, k + 0.5, -k - 0.5, k + 0.5);
    f.plot_right = W - RIGHT - 50.0;
    let logs: Vec<f64> = entries.iter().map(|e| e.2.max(10f64.powf(floor)).log10()).collect();
    let hi = logs.iter().copied().fold(floor, f64::max);
    let span = if hi > floor { hi - floor } else { 1.0 };
    let mut out = String::new();
    open(&mut out, labels, &f);
    let (cw, ch) = (f.px(1.0) - f.px(0.0), f.py(0.0) - f.py(1.0));
    for (e, lg) in entries.iter().zip(&logs) {
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
            f.px(e.0 as f64 - 0.5),
            f.py(e.1 as f64 + 0.5),
            cw,
            ch,
            color((lg - floor) / span)
        );
    }
    colorbar(&mut out, floor, hi, "log10");
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Labels<'static> {
        Labels { title: "m1z", x: "κt", y: "m" }
    }

    #[test]
    fn single_series_is_one_polyline() {
        let s = Series { label: "a", points: (0..50).map(|k| (k as f64, (k as f64).sin())).collect() };
        let svg = line_plot(&labels(), &[s]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("κt"));
    }

    #[test]
    fn output_is_deterministic() {
        let make = || {
            let s = Series { label: "a", points: vec![(0.0, 1.0), (1.0, 0.5)] };
            line_plot(&labels(), &[s]).unwrap()
        };
        assert_eq!(make(), make());
    }

    #[test]
    fn empty_data_rejected() {
        assert!(line_plot(&labels(), &[Series { label: "a", points: vec![] }]).is_err());
        assert!(stem_plot(&labels(), &[]).is_err());
        assert!(lattice_map(&labels(), &[], -14.0).is_err());
        assert!(torus_heat_map(&labels(), 0, &[], 2).is_err());
    }

    #[test]
    fn heat_map_covers_four_cells() {
        let l = 8;
        let grid: Vec<f64> = (0..l * l).map(|k| k as f64).collect();
        let svg = torus_heat_map(&labels(), l, &grid, 2).unwrap();
        // 4 cells of 8×8 tiles plus the 32-step colour bar
        assert_eq!(svg.matches("<rect").count(), 2 + 4 * 64 + 32);
    }

    #[test]
    fn ticks_are_round() {
        let (t, s) = ticks(0.0, 1.0);
        assert_eq!(s, 0.2);
        assert_eq!(t.len(), 6);
        assert_eq!(tick_label(-0.0, 0.2), "0.0");
        assert_eq!(color(0.5), "#ffffff");
    }
}
