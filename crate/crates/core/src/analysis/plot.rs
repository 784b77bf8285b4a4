//! Minimal SVG line plots.

use std::fmt::Write;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 200.0;
const MARGIN: f64 = 48.0;
const MAX_POINTS: usize = 2000;

pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

pub struct Panel<'a> {
    pub title: String,
    pub series: Vec<Series<'a>>,
    /// Horizontal reference line (e.g. `h = 0`).
    pub reference: Option<f64>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    top: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn fit(series: &[Series], extra_y: Option<f64>, left: f64, top: f64, w: f64, h: f64) -> Self {
        let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
        let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
        for s in series {
            for (x, y) in s.x.iter().zip(s.y) {
                if x.is_finite() && y.is_finite() {
                    xs = (xs.0.min(*x), xs.1.max(*x));
                    ys = (ys.0.min(*y), ys.1.max(*y));
                }
            }
        }
        if let Some(r) = extra_y {
            ys = (ys.0.min(r), ys.1.max(r));
        }
        if !xs.0.is_finite() {
            xs = (0.0, 1.0);
            ys = (0.0, 1.0);
        }
        if xs.1 - xs.0 <= 0.0 {
            xs.1 = xs.0 + 1.0;
        }
        if ys.1 - ys.0 <= 0.0 {
            ys = (ys.0 - 0.5, ys.1 + 0.5);
        }
        let pad = 0.05 * (ys.1 - ys.0);
        Self {
            x0: xs.0,
            x1: xs.1,
            y0: ys.0 - pad,
            y1: ys.1 + pad,
            left,
            top,
            w,
            h,
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x0) / (self.x1 - self.x0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.top + (self.y1 - y) / (self.y1 - self.y0) * self.h
    }
}

fn polyline(out: &mut String, f: &Frame, x: &[f64], y: &[f64], color: &str) {
    let stride = (x.len() / MAX_POINTS).max(1);
    let pts: Vec<String> = x
        .iter()
        .zip(y)
        .step_by(stride)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| format!("{:.2},{:.2}", f.px(*a), f.py(*b)))
        .collect();
    if !pts.is_empty() {
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            pts.join(" ")
        );
    }
}

fn axes(out: &mut String, f: &Frame, title: &str) {
    let _ = writeln!(
        out,
        r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
        f.left, f.top, f.w, f.h
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="12">{}</text>"#,
        f.left,
        f.top - 6.0,
        escape(title)
    );
    for (v, y) in [(f.y1, f.top + 10.0), (f.y0, f.top + f.h)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
            f.left - 4.0,
            y,
            tick(v)
        );
    }
    for (v, anchor) in [(f.x0, "start"), (f.x1, "end")] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="{anchor}">{}</text>"#,
            f.px(v),
            f.top + f.h + 12.0,
            tick(v)
        );
    }
}

fn legend(out: &mut String, f: &Frame, series: &[Series]) {
    for (i, s) in series.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" fill="{}" text-anchor="end">{}</text>"#,
            f.left + f.w - 4.0,
            f.top + 12.0 * (i + 1) as f64,
            COLORS[i % COLORS.len()],
            escape(s.label)
        );
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(width: f64, height: f64) -> String {
    format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">
<rect width="100%" height="100%" fill="white"/>
"#
    )
}

/// Panels stacked vertically, sharing nothing but the canvas.
pub fn stacked(panels: &[Panel]) -> String {
    let height = panels.len() as f64 * (PANEL_H + MARGIN) + MARGIN / 2.0;
    let mut out = open(PANEL_W + 2.0 * MARGIN, height);
    for (i, p) in panels.iter().enumerate() {
        let top = MARGIN / 2.0 + 16.0 + i as f64 * (PANEL_H + MARGIN);
        let f = Frame::fit(&p.series, p.reference, MARGIN * 1.5, top, PANEL_W - MARGIN, PANEL_H);
        axes(&mut out, &f, &p.title);
        if let Some(r) = p.reference {
            let _ = writeln!(
                out,
                r##"<line x1="{:.1}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
                f.left,
                f.left + f.w,
                y = f.py(r)
            );
        }
        for (j, s) in p.series.iter().enumerate() {
            polyline(&mut out, &f, s.x, s.y, COLORS[j % COLORS.len()]);
        }
        legend(&mut out, &f, &p.series);
    }
    out.push_str("</svg>\n");
    out
}

/// Trace in the complex plane, real part on the horizontal axis.
pub fn complex_plane(title: &str, series: &[Series]) -> String {
    let side = PANEL_W * 0.75;
    let mut out = open(side + 2.0 * MARGIN, side + 2.0 * MARGIN);
    let f = Frame::fit(series, Some(0.0), MARGIN * 1.5, MARGIN, side - MARGIN, side - MARGIN);
    axes(&mut out, &f, title);
    let _ = writeln!(
        out,
        r##"<line x1="{:.1}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
        f.left,
        f.left + f.w,
        y = f.py(0.0)
    );
    for (j, s) in series.iter().enumerate() {
        polyline(&mut out, &f, s.x, s.y, COLORS[j % COLORS.len()]);
    }
    legend(&mut out, &f, series);
    out.push_str("</svg>\n");
    out
}

/// A planar path with an optional disc obstacle `(cx, cy, radius)` drawn per entry.
pub fn xy_path(title: &str, x: &[f64], y: &[f64], discs: &[(f64, f64, f64)], goal: Option<(f64, f64)>) -> String {
    let mut xs: Vec<f64> = x.to_vec();
    let mut ys: Vec<f64> = y.to_vec();
    for (cx, cy, r) in discs {
        xs.extend([cx - r, cx + r]);
        ys.extend([cy - r, cy + r]);
    }
    if let Some((gx, gy)) = goal {
        xs.push(gx);
        ys.push(gy);
    }
    // equal aspect ratio
    let (xmin, xmax) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, v| (a.0.min(*v), a.1.max(*v)));
    let (ymin, ymax) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, v| (a.0.min(*v), a.1.max(*v)));
    let span = (xmax - xmin).max(ymax - ymin).max(1e-9);
    let side = PANEL_W * 0.9;
    let bounds = [
        Series { label: "", x: &[xmin, xmin + span], y: &[ymin, ymin + span] },
    ];
    let mut out = open(side + 2.0 * MARGIN, side + 2.0 * MARGIN);
    let mut f = Frame::fit(&bounds, None, MARGIN * 1.5, MARGIN, side - MARGIN, side - MARGIN);
    f.y0 = ymin - 0.05 * span;
    f.y1 = ymin + 1.05 * span;
    f.x0 = xmin - 0.05 * span;
    f.x1 = xmin + 1.05 * span;
    axes(&mut out, &f, title);
    for (cx, cy, r) in discs {
        let _ = writeln!(
            out,
            r##"<ellipse cx="{:.2}" cy="{:.2}" rx="{:.2}" ry="{:.2}" fill="none" stroke="#d62728"/>"##,
            f.px(*cx),
            f.py(*cy),
            r / (f.x1 - f.x0) * f.w,
            r / (f.y1 - f.y0) * f.h
        );
    }
    if let Some((gx, gy)) = goal {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#2ca02c"/>"##,
            f.px(gx),
            f.py(gy)
        );
    }
    polyline(&mut out, &f, x, y, COLORS[0]);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stacked_is_well_formed() {
        let t = [0.0, 1.0, 2.0];
        let y = [1.0, f64::NAN, 3.0];
        let svg = stacked(&[Panel {
            title: "h <m>".into(),
            series: vec![Series { label: "a", x: &t, y: &y }],
            reference: Some(0.0),
        }]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("h &lt;m&gt;"));
        assert!(svg.contains("<polyline"));
    }

    #[test]
    fn empty_series_still_renders() {
        let svg = complex_plane("psi", &[Series { label: "x", x: &[], y: &[] }]);
        assert!(svg.contains("</svg>"));
        let svg = xy_path("path", &[0.0, 1.0], &[0.0, 1.0], &[(0.5, 0.5, 0.2)], Some((1.0, 1.0)));
        assert!(svg.contains("<ellipse"));
    }
}
