//! Minimal SVG scatter plots of reconstructed points.

use std::fmt::Write as _;

use crate::config::Axes;
use crate::geometry::Point3;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;

/// A circle drawn under the points, e.g. the true obstacle outline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outline {
    pub center: Point3,
    pub radius: f64,
}

pub struct Plot<'a> {
    pub title: &'a str,
    pub axes: Axes,
    pub points: &'a [Point3],
    pub truth: Option<Outline>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders the plot. Output depends only on the inputs.
pub fn render(plot: &Plot) -> String {
    let (a, b) = plot.axes.indices();
    let (la, lb) = plot.axes.labels();

    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut grow = |u: f64, v: f64| {
        lo = [lo[0].min(u), lo[1].min(v)];
        hi = [hi[0].max(u), hi[1].max(v)];
    };
    for p in plot.points {
        grow(p[a], p[b]);
    }
    if let Some(t) = plot.truth {
        grow(t.center[a] - t.radius, t.center[b] - t.radius);
        grow(t.center[a] + t.radius, t.center[b] + t.radius);
    }
    if !lo[0].is_finite() {
        lo = [-1.0, -1.0];
        hi = [1.0, 1.0];
    }
    // square, padded view so circles stay round
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9) * 1.1;
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let origin = [mid[0] - span / 2.0, mid[1] - span / 2.0];
    let scale = (WIDTH - 2.0 * MARGIN) / span;
    let sx = |u: f64| MARGIN + (u - origin[0]) * scale;
    let sy = |v: f64| HEIGHT - MARGIN - (v - origin[1]) * scale;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{w}" fill="none" stroke="#888"/>"##,
        w = WIDTH - 2.0 * MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        esc(plot.title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{la} (m)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {})">{lb} (m)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (val, x, y, anchor) in [
        (origin[0], MARGIN, HEIGHT - MARGIN + 16.0, "start"),
        (
            origin[0] + span,
            WIDTH - MARGIN,
            HEIGHT - MARGIN + 16.0,
            "end",
        ),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-family="sans-serif" font-size="10">{val:.3}</text>"#
        );
    }
    for (val, y) in [
        (origin[1], HEIGHT - MARGIN),
        (origin[1] + span, MARGIN + 10.0),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y}" text-anchor="end" font-family="sans-serif" font-size="10">{val:.3}</text>"#,
            MARGIN - 4.0
        );
    }
    if let Some(t) = plot.truth {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.3}" cy="{:.3}" r="{:.3}" fill="none" stroke="#3a7" stroke-dasharray="4 3"/>"##,
            sx(t.center[a]),
            sy(t.center[b]),
            t.radius * scale
        );
    }
    for p in plot.points {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.3}" cy="{:.3}" r="3" fill="#c33"/>"##,
            sx(p[a]),
            sy(p[b])
        );
    }
    s.push_str("</svg>\n");
    s
}
