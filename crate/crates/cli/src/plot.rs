//! Line plots of trends as standalone SVG.
//!
//! Segments are styled by the number of users behind them: solid from 50
//! users, dashed from 10, faint dotted below that.

use std::fmt::Write as _;

use coordprop::measures::TrendSeries;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

pub const SOLID_SUPPORT: usize = 50;
pub const DASHED_SUPPORT: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stroke {
    Solid,
    Dashed,
    Faint,
}

pub fn stroke_for(support: usize) -> Stroke {
    if support >= SOLID_SUPPORT {
        Stroke::Solid
    } else if support >= DASHED_SUPPORT {
        Stroke::Dashed
    } else {
        Stroke::Faint
    }
}

fn stroke_attrs(s: Stroke) -> &'static str {
    match s {
        Stroke::Solid => r#"stroke-width="2""#,
        Stroke::Dashed => r#"stroke-width="2" stroke-dasharray="6 4" stroke-opacity="0.8""#,
        Stroke::Faint => r#"stroke-width="1.5" stroke-dasharray="2 3" stroke-opacity="0.35""#,
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Plots each series against its grid on `[0,1] x [0,1]`. Undefined points break the line.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[TrendSeries<f64>]) -> String {
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + x.clamp(0.0, 1.0) * pw;
    let sy = |y: f64| TOP + (1.0 - y.clamp(0.0, 1.0)) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let (x, y) = (sx(v), sy(v));
        let _ = writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#e0e0e0"/>"##,
            TOP,
            TOP + ph
        );
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#e0e0e0"/>"##,
            LEFT + pw
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{v:.2}</text>"#,
            TOP + ph + 18.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT:.1}" y="{TOP:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, r#"<g fill="none" stroke="{color}">"#);
        for j in 1..s.grid.len() {
            if let (Some(a), Some(b)) = (s.values[j - 1], s.values[j]) {
                let support = s.users[j - 1].min(s.users[j]);
                let _ = writeln!(
                    out,
                    r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" {}/>"#,
                    sx(s.grid[j - 1]),
                    sy(a),
                    sx(s.grid[j]),
                    sy(b),
                    stroke_attrs(stroke_for(support))
                );
            }
        }
        // isolated points would otherwise be invisible
        for j in 0..s.grid.len() {
            let alone = s.values[j].is_some()
                && (j == 0 || s.values[j - 1].is_none())
                && (j + 1 == s.grid.len() || s.values[j + 1].is_none());
            if alone {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{color}"/>"#,
                    sx(s.grid[j]),
                    sy(s.values[j].expect("checked"))
                );
            }
        }
        let _ = writeln!(out, "</g>");
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 14.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            lx + 24.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 30.0,
            ly + 4.0,
            escape(&s.community)
        );
    }
    out.push_str("</svg>\n");
    out
}
