//! Ascending-vs-descending score scatter data and a standalone SVG rendering.

use std::fmt::Write;

use super::report::{ModeRef, ResultBody, ScoreRow};

pub const FIGURE_HEADER: &str = "mode_id,mode_name,ascending_score,descending_score,overall";

/// Observed modes become points; unobserved modes are returned separately.
pub fn figure_points(result: &ResultBody) -> (Vec<&ScoreRow>, Vec<&ModeRef>) {
    let unobserved: Vec<&ModeRef> = result.ranking.unobserved.iter().collect();
    let points = result.scores.iter().filter(|s| !unobserved.iter().any(|u| u.mode_id == s.mode_id)).collect();
    (points, unobserved)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Figure data CSV with scores rounded to six decimals.
pub fn figure_csv(points: &[&ScoreRow]) -> String {
    let mut out = String::from(FIGURE_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6}",
            p.mode_id,
            csv_field(&p.mode_name),
            p.ascending_score,
            p.descending_score,
            p.overall
        );
    }
    out
}

pub fn unobserved_note(unobserved: &[&ModeRef]) -> String {
    let mut out = String::from("# modes with no transfers, omitted from the figure\n");
    for m in unobserved {
        let _ = writeln!(out, "{} {}", m.mode_id, m.mode_name);
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const SIZE: f64 = 480.0;
const MARGIN: f64 = 60.0;

/// Maps a score in `[0, 1]` to plot coordinates; y grows upward.
pub fn to_canvas(ascending: f64, descending: f64) -> (f64, f64) {
    let span = SIZE - 2.0 * MARGIN;
    (MARGIN + ascending * span, SIZE - MARGIN - descending * span)
}

/// Scatter of descending (y) against ascending (x) score, with the `y = x`
/// reference line and one labelled point per mode.
pub fn scatter_svg(points: &[&ScoreRow], title: &str) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        SIZE / 2.0,
        xml_escape(title)
    );

    let (x0, y0) = to_canvas(0.0, 0.0);
    let (x1, y1) = to_canvas(1.0, 1.0);
    let _ = writeln!(svg, r#"<g id="axes" stroke="black" fill="none">"#);
    let _ = writeln!(svg, r#"<rect x="{x0}" y="{y1}" width="{}" height="{}"/>"#, x1 - x0, y0 - y1);
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let (tx, ty) = to_canvas(v, v);
        let _ = writeln!(svg, r#"<line x1="{tx}" y1="{y0}" x2="{tx}" y2="{}"/>"#, y0 + 5.0);
        let _ = writeln!(svg, r#"<line x1="{x0}" y1="{ty}" x2="{}" y2="{ty}"/>"#, x0 - 5.0);
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g id="tick-labels">"#);
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let (tx, ty) = to_canvas(v, v);
        let _ = writeln!(svg, r#"<text x="{tx}" y="{}" text-anchor="middle">{v:.2}</text>"#, y0 + 18.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{v:.2}</text>"#, x0 - 8.0, ty + 4.0);
    }
    let _ = writeln!(svg, "</g>");
    let _ =
        writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">ascending score</text>"#, SIZE / 2.0, SIZE - 18.0);
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">descending score</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<line id="diagonal" x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="orange" stroke-width="2"/>"#
    );
    let _ = writeln!(svg, r#"<g id="points">"#);
    for p in points {
        let (cx, cy) = to_canvas(p.ascending_score, p.descending_score);
        let _ = writeln!(
            svg,
            r#"<circle class="mode" data-mode-id="{}" cx="{cx:.3}" cy="{cy:.3}" r="5" fill="steelblue"/>"#,
            p.mode_id
        );
        let _ = writeln!(svg, r#"<text x="{:.3}" y="{:.3}">{}</text>"#, cx + 8.0, cy - 6.0, xml_escape(&p.mode_name));
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    svg
}
