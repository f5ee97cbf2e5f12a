//! Minimal static SVG charts: line panels and bar histograms.

use std::fmt::Write;

const W: f64 = 640.0;
const PANEL_H: f64 = 260.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 44.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 10.0 {
        format!("{v:.1}")
    } else {
        num((v * 100.0).round() / 100.0)
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
        (l.min(v), h.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let lo = lo.min(0.0);
    if hi <= lo {
        (lo, lo + 1.0)
    } else {
        (lo, hi)
    }
}

fn frame(
    out: &mut String,
    y0: f64,
    title: &str,
    x_label: &str,
    y_label: &str,
    xr: (f64, f64),
    yr: (f64, f64),
) {
    let (pw, ph) = (W - LEFT - RIGHT, PANEL_H - TOP - BOTTOM);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{}</text>"#,
        num(W / 2.0),
        num(y0 + 20.0),
        escape(title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        num(LEFT),
        num(y0 + TOP),
        num(pw),
        num(ph)
    );
    for t in 0..=4 {
        let f = t as f64 / 4.0;
        let x = LEFT + f * pw;
        let y = y0 + TOP + ph - f * ph;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" text-anchor="middle">{}</text>"#,
            num(x),
            num(y0 + TOP + ph + 14.0),
            tick(xr.0 + f * (xr.1 - xr.0))
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"#,
            num(LEFT - 6.0),
            num(y + 3.0),
            tick(yr.0 + f * (yr.1 - yr.0))
        );
        if t > 0 && t < 4 {
            let _ = writeln!(
                out,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#ddd"/>"##,
                num(LEFT),
                num(y),
                num(LEFT + pw),
                num(y)
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
        num(LEFT + pw / 2.0),
        num(y0 + PANEL_H - 8.0),
        escape(x_label)
    );
    let cy = y0 + TOP + ph / 2.0;
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" font-size="11" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        num(cy),
        num(cy),
        escape(y_label)
    );
}

/// Vertically stacked line panels sharing one document.
pub fn line_chart(panels: &[Panel]) -> String {
    let height = PANEL_H * panels.len().max(1) as f64;
    let mut out = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif">"#,
        num(W),
        num(height),
        num(W),
        num(height)
    );
    out.push('\n');
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (pw, ph) = (W - LEFT - RIGHT, PANEL_H - TOP - BOTTOM);
    for (p, panel) in panels.iter().enumerate() {
        let y0 = p as f64 * PANEL_H;
        let all = || panel.series.iter().flat_map(|s| s.points.iter());
        let xr = extent(all().map(|p| p.0));
        let yr = extent(all().map(|p| p.1));
        frame(
            &mut out,
            y0,
            &panel.title,
            &panel.x_label,
            &panel.y_label,
            xr,
            yr,
        );
        for (s, series) in panel.series.iter().enumerate() {
            let colour = PALETTE[s % PALETTE.len()];
            let pts: Vec<String> = series
                .points
                .iter()
                .map(|&(x, y)| {
                    let sx = LEFT + (x - xr.0) / (xr.1 - xr.0) * pw;
                    let sy = y0 + TOP + ph - (y - yr.0) / (yr.1 - yr.0) * ph;
                    format!("{},{}", num(sx), num(sy))
                })
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
            if panel.series.len() > 1 {
                let ly = y0 + TOP + 14.0 + 14.0 * s as f64;
                let _ = writeln!(
                    out,
                    r#"<text x="{}" y="{}" font-size="10" fill="{colour}">{}</text>"#,
                    num(LEFT + 8.0),
                    num(ly),
                    escape(&series.name)
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Bar chart of `counts` over bins `[i w, (i + 1) w)`.
pub fn histogram_chart(
    title: &str,
    x_label: &str,
    width: f64,
    counts: &[usize],
    note: Option<&str>,
) -> String {
    let mut out = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif">"#,
        num(W),
        num(PANEL_H),
        num(W),
        num(PANEL_H)
    );
    out.push('\n');
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let bins = counts.len().max(1);
    let xr = (0.0, bins as f64 * width);
    let yr = (0.0, counts.iter().copied().max().unwrap_or(0).max(1) as f64);
    frame(&mut out, 0.0, title, x_label, "inputs", xr, yr);
    let (pw, ph) = (W - LEFT - RIGHT, PANEL_H - TOP - BOTTOM);
    let bw = pw / bins as f64;
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let h = c as f64 / yr.1 * ph;
        let _ = writeln!(
            out,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#1f77b4" stroke="white"/>"##,
            num(LEFT + i as f64 * bw),
            num(TOP + ph - h),
            num(bw),
            num(h)
        );
    }
    if let Some(note) = note {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"#,
            num(W - RIGHT - 6.0),
            num(TOP + 14.0),
            escape(note)
        );
    }
    out.push_str("</svg>\n");
    out
}
