//! Deterministic SVG plots of report series.

use permfield::experiments::{Series, SeriesKind};
use permfield::{Error, Result};
use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn pad(lo: f64, hi: f64) -> (f64, f64) {
    if lo < hi {
        let m = 0.04 * (hi - lo);
        (lo - m, hi + m)
    } else {
        let m = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - m, hi + m)
    }
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".into()
        } else {
            s.into()
        }
    }
}

/// Render `series` as one SVG document: line charts draw polylines (a lone
/// point becomes a marker), histograms draw bars. Non-finite points are
/// skipped, so `-inf` field values leave gaps.
pub fn emit_plot(series: &[Series], kind: SeriesKind) -> Result<String> {
    let finite = |s: &Series| -> Vec<[f64; 2]> {
        s.points.iter().copied().filter(|p| p[0].is_finite() && p[1].is_finite()).collect()
    };
    let data: Vec<(&Series, Vec<[f64; 2]>)> = series.iter().map(|s| (s, finite(s))).collect();
    if data.iter().all(|(_, p)| p.is_empty()) {
        return Err(Error::InvalidArgument("plot needs at least one finite point".into()));
    }
    let pts = data.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let bar_width = match kind {
        SeriesKind::Histogram => data
            .iter()
            .filter_map(|(_, p)| p.windows(2).map(|w| (w[1][0] - w[0][0]).abs()).reduce(f64::min))
            .reduce(f64::min)
            .unwrap_or(1.0),
        SeriesKind::Line => 0.0,
    };
    if kind == SeriesKind::Histogram {
        x0 -= bar_width / 2.0;
        x1 += bar_width / 2.0;
        y0 = 0.0;
    }
    for (mx, _) in series.iter().flat_map(|s| s.markers.iter()) {
        x0 = x0.min(*mx);
        x1 = x1.max(*mx);
    }
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = if kind == SeriesKind::Histogram { (0.0, pad(y0, y1).1) } else { pad(y0, y1) };
    let f = Frame { x0, x1, y0, y1 };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let title = series.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join(" / ");
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&title)
    );
    // axes
    let (bx, by) = (f.py(y0), f.px(x0));
    let _ = writeln!(
        out,
        r#"<path d="M{by:.2},{:.2} L{by:.2},{bx:.2} L{:.2},{bx:.2}" fill="none" stroke="black"/>"#,
        TOP,
        WIDTH - RIGHT
    );
    for i in 0..=5 {
        let xv = x0 + (x1 - x0) * i as f64 / 5.0;
        let yv = y0 + (y1 - y0) * i as f64 / 5.0;
        let (px, py) = (f.px(xv), f.py(yv));
        let _ = writeln!(out, r#"<line x1="{px:.2}" y1="{bx:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, bx + 5.0);
        let _ =
            writeln!(out, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, bx + 18.0, tick_label(xv));
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{py:.2}" x2="{by:.2}" y2="{py:.2}" stroke="black"/>"#, by - 5.0);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            by - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let first = series.first().expect("nonempty");
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 14.0,
        escape(&first.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(&first.y_label)
    );

    for (i, (s, pts)) in data.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        match kind {
            SeriesKind::Line if pts.len() == 1 => {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                    f.px(pts[0][0]),
                    f.py(pts[0][1])
                );
            }
            SeriesKind::Line => {
                let path: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", f.px(p[0]), f.py(p[1]))).collect();
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
                    path.join(" ")
                );
            }
            SeriesKind::Histogram => {
                for p in pts {
                    let (xa, xb) = (f.px(p[0] - bar_width / 2.0), f.px(p[0] + bar_width / 2.0));
                    let (ya, yb) = (f.py(p[1]), f.py(0.0));
                    let _ = writeln!(
                        out,
                        r#"<rect x="{xa:.2}" y="{ya:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.6"/>"#,
                        xb - xa,
                        yb - ya
                    );
                }
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="{color}">{}</text>"#,
            WIDTH - RIGHT - 4.0,
            TOP + 14.0 * (i as f64 + 1.0),
            escape(&s.name)
        );
        for (mx, label) in &s.markers {
            let px = f.px(*mx);
            let _ = writeln!(
                out,
                r#"<line x1="{px:.2}" y1="{TOP:.2}" x2="{px:.2}" y2="{bx:.2}" stroke="gray" stroke-dasharray="4 3"/>"#
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" fill="gray">{}</text>"#,
                px + 4.0,
                TOP + 12.0,
                escape(label)
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}
