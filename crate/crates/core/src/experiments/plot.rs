//! Self-contained SVG rendering of result plots.

use std::fmt::Write;

use super::result::{ExperimentResult, Plot, SeriesStyle};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 * lo.abs().max(1.0) {
            let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
            (lo, hi) = (lo - pad, hi + pad);
        }
        let pad = 0.05 * (hi - lo);
        Self {
            lo: lo - pad,
            hi: hi + pad,
            log,
        }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        let v = if self.log { v.log10() } else { v };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    fn tick_label(&self, t: f64) -> String {
        let v = if self.log { 10f64.powf(t) } else { t };
        if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
            format!("{v:.2e}")
        } else {
            format!("{v:.4}")
        }
    }
}

/// Renders one plot. Output depends only on `plot`.
pub fn render_svg(plot: &Plot) -> String {
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let points = || plot.series.iter().flat_map(|s| s.points.iter());
    let xa = Axis::fit(points().map(|p| p.x), false);
    let ya = Axis::fit(
        points().flat_map(|p| {
            let e = if p.err.is_finite() { p.err } else { 0.0 };
            let lo = if plot.log_y && p.y - e <= 0.0 { p.y } else { p.y - e };
            [lo, p.y + e]
        }),
        plot.log_y,
    );
    let px = |x: f64| xa.frac(x).map(|f| LEFT + f * pw);
    let py = |y: f64| ya.frac(y).map(|f| TOP + (1.0 - f) * ph);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&plot.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let tx = xa.lo + f * (xa.hi - xa.lo);
        let ty = ya.lo + f * (ya.hi - ya.lo);
        let x = LEFT + f * pw;
        let y = TOP + (1.0 - f) * ph;
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{TOP}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 16.0,
            xa.tick_label(tx)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            ya.tick_label(ty)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 18.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&plot.y_label),
        if plot.log_y { " (log scale)" } else { "" }
    );

    for (i, ser) in plot.series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let coords: Vec<(f64, f64)> = ser
            .points
            .iter()
            .filter_map(|p| Some((px(p.x)?, py(p.y)?)))
            .collect();
        match ser.style {
            SeriesStyle::Line => {
                let path: Vec<String> = coords.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
                    path.join(" ")
                );
            }
            SeriesStyle::Markers => {
                for p in &ser.points {
                    let (Some(x), Some(y)) = (px(p.x), py(p.y)) else {
                        continue;
                    };
                    if p.err > 0.0 && p.err.is_finite() {
                        let lo = if plot.log_y && p.y - p.err <= 0.0 { p.y } else { p.y - p.err };
                        if let (Some(y0), Some(y1)) = (py(lo), py(p.y + p.err)) {
                            let _ = writeln!(
                                s,
                                r#"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{y1:.1}" stroke="{c}"/>"#
                            );
                        }
                    }
                    let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{c}"/>"#);
                }
            }
        }
        let ly = TOP + 12.0 + 16.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{:.1}" width="10" height="10" fill="{c}"/><text x="{:.1}" y="{ly:.1}">{}</text>"#,
            ly - 9.0,
            lx + 14.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// `(file name, svg)` for every plot of a result.
pub fn render_all(result: &ExperimentResult) -> Vec<(String, String)> {
    result
        .plots
        .iter()
        .map(|p| (format!("{}.svg", p.name), render_svg(p)))
        .collect()
}
