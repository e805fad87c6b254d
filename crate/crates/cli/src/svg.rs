//! Minimal static SVG plots: line charts and histograms.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    log_y: bool,
}

impl Frame {
    fn fit<'a>(points: impl Iterator<Item = &'a (f64, f64)>, log_y: bool) -> Self {
        let mut f = Frame {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
            log_y,
        };
        for &(x, y) in points {
            let y = if log_y {
                if y > 0.0 {
                    y.log10()
                } else {
                    continue;
                }
            } else {
                y
            };
            if !x.is_finite() || !y.is_finite() {
                continue;
            }
            f.x0 = f.x0.min(x);
            f.x1 = f.x1.max(x);
            f.y0 = f.y0.min(y);
            f.y1 = f.y1.max(y);
        }
        if !f.x0.is_finite() {
            (f.x0, f.x1, f.y0, f.y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if f.x1 <= f.x0 {
            f.x1 = f.x0 + 1.0;
        }
        if f.y1 <= f.y0 {
            f.y1 = f.y0 + 1.0;
        }
        f
    }

    fn map(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let y = if self.log_y {
            if y > 0.0 {
                y.log10()
            } else {
                return None;
            }
        } else {
            y
        };
        if !x.is_finite() || !y.is_finite() {
            return None;
        }
        let px = MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN);
        let py = HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN);
        Some((px, py))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(out: &mut String, title: &str, f: &Frame) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#
    );
    let ylab = |v: f64| {
        if f.log_y {
            format!("1e{v:.1}")
        } else {
            format!("{v:.3}")
        }
    };
    let _ = writeln!(
        out,
        r#"<text x="{l}" y="{}" font-family="sans-serif" font-size="10">{:.3}</text><text x="{r}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{:.3}</text>"#,
        b + 14.0,
        f.x0,
        b + 14.0,
        f.x1
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{b}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text><text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
        l - 4.0,
        ylab(f.y0),
        l - 4.0,
        t + 4.0,
        ylab(f.y1)
    );
}

fn polyline(out: &mut String, f: &Frame, points: &[(f64, f64)], color: &str) {
    let mut d = String::new();
    for &(x, y) in points {
        if let Some((px, py)) = f.map(x, y) {
            let _ = write!(d, "{}{px:.2},{py:.2}", if d.is_empty() { "" } else { " " });
        }
    }
    let _ = writeln!(
        out,
        r#"<polyline points="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
    );
}

fn legend(out: &mut String, labels: &[&str]) {
    for (k, label) in labels.iter().enumerate() {
        let y = MARGIN + 14.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="end" fill="{}">{}</text>"#,
            WIDTH - MARGIN,
            COLORS[k % COLORS.len()],
            escape(label)
        );
    }
}

pub fn line_plot(title: &str, series: &[Series], log_y: bool) -> String {
    let f = Frame::fit(series.iter().flat_map(|s| s.points.iter()), log_y);
    let mut out = String::new();
    open(&mut out, title, &f);
    for (k, s) in series.iter().enumerate() {
        polyline(&mut out, &f, &s.points, COLORS[k % COLORS.len()]);
    }
    legend(&mut out, &series.iter().map(|s| s.label.as_str()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Bars on `edges` with an optional reference curve over them.
pub fn histogram(title: &str, edges: &[f64], density: &[f64], reference: Option<&[(f64, f64)]>) -> String {
    let mut pts: Vec<(f64, f64)> = edges.iter().map(|&e| (e, 0.0)).collect();
    pts.extend(edges.iter().zip(density).map(|(&e, &d)| (e, d)));
    if let Some(r) = reference {
        pts.extend_from_slice(r);
    }
    let f = Frame::fit(pts.iter(), false);
    let mut out = String::new();
    open(&mut out, title, &f);
    for (w, &d) in edges.windows(2).zip(density) {
        if let (Some((x0, y0)), Some((x1, _))) = (f.map(w[0], d), f.map(w[1], 0.0)) {
            let base = HEIGHT - MARGIN;
            let _ = writeln!(
                out,
                r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="#3182bd"/>"##,
                (x1 - x0).max(0.0),
                (base - y0).max(0.0)
            );
        }
    }
    let mut labels = vec!["sampled"];
    if let Some(r) = reference {
        polyline(&mut out, &f, r, COLORS[1]);
        labels.push("reference");
    }
    legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}
