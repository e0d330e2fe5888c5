//! Minimal self-contained SVG line charts: no external assets, no script,
//! fixed palette, safe to drop into docs or CI artifact stores as-is.

use std::fmt::Write as _;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 540.0;
const MARGIN_LEFT: f64 = 84.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 64.0;
const TICKS: usize = 5;

/// Line colors, cycled across series.
pub const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series {
    pub label: String,
    /// Data points in chart coordinates; non-finite entries are ignored.
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
}

fn esc(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Short tick label: plain decimal in a comfortable magnitude window,
/// scientific outside it.
fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Data range with padding; degenerate (single-value) ranges get a span
/// proportional to their magnitude so the point sits mid-chart.
fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    if span > 0.0 {
        (lo - 0.04 * span, hi + 0.04 * span)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    }
}

/// Renders a complete SVG document: titled axes with ticks and grid, one
/// polyline per series, point markers on short series, and a legend when
/// there is more than one series. Series with no finite points are dropped;
/// a chart with no data at all renders the axes frame and a note.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = MARGIN_TOP;
    let y1 = HEIGHT - MARGIN_BOTTOM;

    let cleaned: Vec<(&Series, Vec<(f64, f64)>)> = series
        .iter()
        .map(|s| {
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .copied()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect();
            (s, pts)
        })
        .filter(|(_, pts)| !pts.is_empty())
        .collect();

    let mut out = String::with_capacity(4096);
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = write!(
        out,
        r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##
    );
    let _ = write!(
        out,
        r##"<text x="{:.1}" y="28" text-anchor="middle" font-size="17" fill="#222222">{}</text>"##,
        (x0 + x1) / 2.0,
        esc(title)
    );

    if cleaned.is_empty() {
        let _ = write!(
            out,
            r##"<rect x="{x0}" y="{y0}" width="{:.1}" height="{:.1}" fill="none" stroke="#888888"/>"##,
            x1 - x0,
            y1 - y0
        );
        let _ = write!(
            out,
            r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14" fill="#555555">no plottable data</text>"##,
            (x0 + x1) / 2.0,
            (y0 + y1) / 2.0
        );
        out.push_str("</svg>\n");
        return out;
    }

    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for (_, pts) in &cleaned {
        for &(x, y) in pts {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    let (xmin, xmax) = padded_range(xmin, xmax);
    let (ymin, ymax) = padded_range(ymin, ymax);
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        (
            x0 + (x - xmin) / (xmax - xmin) * (x1 - x0),
            y1 - (y - ymin) / (ymax - ymin) * (y1 - y0),
        )
    };

    // Grid, ticks, tick labels.
    for i in 0..TICKS {
        let f = i as f64 / (TICKS - 1) as f64;
        let xv = xmin + f * (xmax - xmin);
        let yv = ymin + f * (ymax - ymin);
        let (px, _) = to_px(xv, ymin);
        let (_, py) = to_px(xmin, yv);
        let _ = write!(
            out,
            r##"<line x1="{px:.1}" y1="{y0}" x2="{px:.1}" y2="{y1}" stroke="#dddddd"/>"##
        );
        let _ = write!(
            out,
            r##"<line x1="{x0}" y1="{py:.1}" x2="{x1}" y2="{py:.1}" stroke="#dddddd"/>"##
        );
        let _ = write!(
            out,
            r##"<text x="{px:.1}" y="{:.1}" text-anchor="middle" font-size="12" fill="#222222">{}</text>"##,
            y1 + 18.0,
            fmt_tick(xv)
        );
        let _ = write!(
            out,
            r##"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="12" fill="#222222">{}</text>"##,
            x0 - 8.0,
            py + 4.0,
            fmt_tick(yv)
        );
    }
    let _ = write!(
        out,
        r##"<rect x="{x0}" y="{y0}" width="{:.1}" height="{:.1}" fill="none" stroke="#888888"/>"##,
        x1 - x0,
        y1 - y0
    );
    let _ = write!(
        out,
        r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14" fill="#222222">{}</text>"##,
        (x0 + x1) / 2.0,
        HEIGHT - 16.0,
        esc(x_label)
    );
    let _ = write!(
        out,
        r##"<text transform="rotate(-90)" x="{:.1}" y="20" text-anchor="middle" font-size="14" fill="#222222">{}</text>"##,
        -(y0 + y1) / 2.0,
        esc(y_label)
    );

    // Series polylines and markers.
    for (s, pts) in &cleaned {
        let mut attr = String::with_capacity(pts.len() * 14);
        for &(x, y) in pts {
            let (px, py) = to_px(x, y);
            let _ = write!(attr, "{px:.2},{py:.2} ");
        }
        let _ = write!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.8"/>"#,
            attr.trim_end(),
            s.color
        );
        if pts.len() <= 40 {
            for &(x, y) in pts {
                let (px, py) = to_px(x, y);
                let _ = write!(
                    out,
                    r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{}"/>"#,
                    s.color
                );
            }
        }
    }

    if cleaned.len() > 1 {
        for (i, (s, _)) in cleaned.iter().enumerate() {
            let ly = y0 + 16.0 + 18.0 * i as f64;
            let lx = x1 - 170.0;
            let _ = write!(
                out,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="3"/>"#,
                lx + 26.0,
                s.color
            );
            let _ = write!(
                out,
                r##"<text x="{:.1}" y="{:.1}" font-size="12" fill="#222222">{}</text>"##,
                lx + 32.0,
                ly + 4.0,
                esc(&s.label)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
