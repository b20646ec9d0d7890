//! SVG rendering of a Wasserstein series with its threshold and flagged spans.

use std::fmt::Write;

use crate::detector::WassersteinSeries;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 48.0;

/// Series plotted against the source index of each window's start.
pub fn render_svg(series: &WassersteinSeries, threshold: f64, flagged: &[(usize, usize)], title: &str) -> String {
    let xs: Vec<f64> = series.source_spans.iter().map(|s| s.0 as f64).collect();
    let x_lo = xs.first().copied().unwrap_or(0.0);
    let x_hi = flagged
        .iter()
        .map(|f| f.1 as f64)
        .chain(series.source_spans.iter().map(|s| s.1 as f64))
        .fold(x_lo + 1.0, f64::max);
    let y_hi = series
        .values
        .iter()
        .copied()
        .chain([threshold])
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        .max(1e-12)
        * 1.08;
    let px = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - y / y_hi * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for &(a, b) in flagged {
        let (x0, x1) = (px(a as f64), px(b as f64));
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#f4a3a3" fill-opacity="0.45"/>"##,
            MARGIN,
            (x1 - x0).max(0.5),
            HEIGHT - 2.0 * MARGIN
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        HEIGHT - MARGIN,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{}" stroke="black"/>"#,
        HEIGHT - MARGIN
    );
    let points: Vec<String> = xs
        .iter()
        .zip(&series.values)
        .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#1f4e9c" stroke-width="1.5" points="{}"/>"##,
        points.join(" ")
    );
    let ty = py(threshold);
    let _ = writeln!(
        s,
        r##"<line x1="{MARGIN}" y1="{ty:.2}" x2="{}" y2="{ty:.2}" stroke="#c0392b" stroke-dasharray="6 4"/>"##,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{:.2}" font-family="sans-serif" font-size="14">{}</text>"#,
        MARGIN * 0.6,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">threshold {threshold:.4e}</text>"#,
        WIDTH - MARGIN,
        ty - 4.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">source sample</text>"#,
        WIDTH / 2.0,
        HEIGHT - MARGIN * 0.3
    );
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
