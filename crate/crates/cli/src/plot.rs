//! Log-log SVG plots: data points, fitted lines and theorem-bound curves.
//! Output bytes depend only on the input.

use crate::fit::fit_slope;
use crate::results::ResultRow;
use chaoscope_core::bounds::BoundCheck;
use std::collections::BTreeMap;
use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Series {
    pub label: String,
    /// `(N, value)` with positive values.
    pub points: Vec<(f64, f64)>,
    /// `(N, ln bound)`; drawn clipped to the top of the frame.
    pub bound: Vec<(f64, f64)>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, lx: f64) -> f64 {
        MARGIN + (lx - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, ly: f64) -> f64 {
        HEIGHT - MARGIN - (ly.min(self.y1) - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn frame(series: &[Series]) -> Frame {
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().map(|(x, y)| (x.ln(), y.ln()))).collect();
    if pts.is_empty() {
        return Frame { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let pad_x = ((x1 - x0) * 0.08).max(0.1);
    let pad_y = ((y1 - y0) * 0.08).max(0.1);
    Frame { x0: x0 - pad_x, x1: x1 + pad_x, y0: y0 - pad_y, y1: y1 + pad_y }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One SVG document; an empty slice gives bare axes.
pub fn render_svg(title: &str, series: &[Series]) -> String {
    let f = frame(series);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{:.1}" y="30" font-size="16" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">ln N</text>"#, WIDTH / 2.0, HEIGHT - 20.0);
    let _ = writeln!(svg, r#"<text x="15" y="{:.1}" font-size="12" transform="rotate(-90 15 {:.1})" text-anchor="middle">ln value</text>"#, HEIGHT / 2.0, HEIGHT / 2.0);
    for (k, lx) in [f.x0, f.x1].iter().enumerate() {
        let anchor = if k == 0 { "start" } else { "end" };
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="{anchor}">{lx:.3}</text>"#, f.px(*lx), HEIGHT - MARGIN + 14.0);
    }
    for ly in [f.y0, f.y1] {
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{ly:.3}</text>"#, MARGIN - 4.0, f.py(ly) + 3.0);
    }
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        for (x, y) in &s.points {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, f.px(x.ln()), f.py(y.ln()));
        }
        let xs: Vec<f64> = s.points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = s.points.iter().map(|p| p.1).collect();
        if let Ok(fit) = fit_slope(&xs, &ys) {
            let (a, b) = (f.x0, f.x1);
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}"/>"#,
                f.px(a),
                f.py(fit.intercept + fit.slope * a),
                f.px(b),
                f.py(fit.intercept + fit.slope * b)
            );
        }
        if s.bound.len() >= 2 {
            let path: Vec<String> = s.bound.iter().map(|(x, lb)| format!("{:.2},{:.2}", f.px(x.ln()), f.py(*lb))).collect();
            let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-dasharray="4 3"/>"#, path.join(" "));
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{color}">{}</text>"#,
            WIDTH - MARGIN + 4.0,
            MARGIN + 14.0 * (k as f64 + 1.0),
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bound_kind(quantity: &str) -> Option<&'static str> {
    match quantity {
        "E_norm" => Some("E_j"),
        "chaos" => Some("chaos"),
        "quantum_chaos" => Some("quantum_chaos"),
        _ => None,
    }
}

/// One plot per quantity, one series per `j` at the latest time.
pub fn emit_plots(rows: &[ResultRow], bounds: &[BoundCheck]) -> Vec<(String, String)> {
    let mut by_quantity: BTreeMap<&str, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        by_quantity.entry(r.quantity.as_str()).or_default().push(r);
    }
    let mut out = Vec::new();
    for (quantity, rs) in by_quantity {
        let t_last = rs.iter().map(|r| r.t).fold(f64::NEG_INFINITY, f64::max);
        let mut by_j: BTreeMap<usize, Series> = BTreeMap::new();
        for r in rs.iter().filter(|r| r.t == t_last && r.value.abs() > 0.0) {
            let s = by_j.entry(r.j).or_insert_with(|| Series { label: format!("j={}", r.j), ..Series::default() });
            s.points.push((r.n as f64, r.value.abs()));
        }
        if let Some(kind) = bound_kind(quantity) {
            for b in bounds.iter().filter(|b| b.kind == kind && b.t == t_last) {
                if let Some(s) = by_j.get_mut(&b.j) {
                    s.bound.push((b.n as f64, b.log_bound));
                }
            }
        }
        let series: Vec<Series> = by_j.into_values().collect();
        let title = format!("{quantity} at t = {t_last}");
        out.push((format!("{quantity}.svg"), render_svg(&title, &series)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_gives_bare_axes() {
        let svg = render_svg("empty", &[]);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(!svg.contains("<circle") && !svg.contains("<line"));
        assert!(emit_plots(&[], &[]).is_empty());
    }

    #[test]
    fn single_series_has_one_fitted_line() {
        let s = Series { label: "j=1".into(), points: vec![(8.0, 0.1), (12.0, 0.07), (16.0, 0.05)], bound: vec![] };
        let svg = render_svg("one", &[s]);
        assert_eq!(svg.matches("<line").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn output_is_deterministic() {
        let rows: Vec<ResultRow> =
            [8, 12, 16].iter().map(|&n| ResultRow::new(n, 1, 1.0, "E_norm", 1.0 / n as f64)).collect();
        assert_eq!(emit_plots(&rows, &[]), emit_plots(&rows, &[]));
        assert_eq!(emit_plots(&rows, &[])[0].0, "E_norm.svg");
    }
}
