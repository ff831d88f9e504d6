//! Minimal scatter-plot SVG emitter.

use std::fmt::Write;

/// One point cloud of a panel.
#[derive(Debug, Clone)]
pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: &'a [Vec<f64>],
}

const SIZE: f64 = 480.0;
const MARGIN: f64 = 30.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Square scatter panel with equal axis scaling. Every point becomes one
/// `<circle>` element; legend swatches are `<rect>`s.
pub fn scatter(title: &str, series: &[Series<'_>]) -> String {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in series.iter().flat_map(|s| s.points) {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    if !lo[0].is_finite() {
        lo = [-1.0, -1.0];
        hi = [1.0, 1.0];
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9) * 1.05;
    let center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let px = |p: &[f64]| {
        (
            SIZE / 2.0 + (p[0] - center[0]) * scale,
            SIZE / 2.0 - (p[1] - center[1]) * scale,
        )
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="18" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    );
    for (k, s) in series.iter().enumerate() {
        let _ = writeln!(out, r#"<g fill="{}" fill-opacity="0.7">"#, escape(s.color));
        for p in s.points {
            let (x, y) = px(p);
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2"/>"#);
        }
        let _ = writeln!(out, "</g>");
        let ly = SIZE - 10.0 - 14.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="8" y="{}" width="8" height="8" fill="{}"/><text x="20" y="{ly}" font-family="sans-serif" font-size="11">{}</text>"#,
            ly - 8.0,
            escape(s.color),
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_circle_per_point() {
        let a = vec![vec![0.0, 0.0], vec![1.0, 2.0]];
        let b = vec![vec![-1.0, 0.5]];
        let svg = scatter(
            "a < b & c",
            &[
                Series { label: "first", color: "steelblue", points: &a },
                Series { label: "second", color: "crimson", points: &b },
            ],
        );
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("a &lt; b &amp; c"));
    }

    #[test]
    fn empty_panel() {
        let svg = scatter("empty", &[]);
        assert_eq!(svg.matches("<circle").count(), 0);
    }
}
