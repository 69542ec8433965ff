//! Minimal SVG charts for the two experiments.

use std::fmt::Write as _;

use super::emit::fmt6;
use super::spatial::SpatialResult;
use super::temporal::TemporalResult;
use crate::engine::AgentProfile;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;
const INTERFACE_COLOR: &str = "#8c8c8c";
const MEMORY_COLOR: &str = "#1f77b4";

fn header(title: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#,
        WIDTH / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">{y_label}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        HEIGHT - MARGIN,
        WIDTH - MARGIN / 2.0,
        HEIGHT - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{}" stroke="black"/>"#,
        HEIGHT - MARGIN
    );
    s
}

fn legend(s: &mut String) {
    for (i, (label, color)) in [("interface", INTERFACE_COLOR), ("memory", MEMORY_COLOR)].iter().enumerate() {
        let y = 44.0 + 16.0 * i as f64;
        let x = WIDTH - 150.0;
        let _ = writeln!(s, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{color}"/>"#, y - 9.0);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{label}</text>"#, x + 16.0);
    }
}

fn y_ticks(s: &mut String, lo: f64, hi: f64, to_y: impl Fn(f64) -> f64) {
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let y = to_y(v);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.2}" x2="{MARGIN}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            MARGIN - 4.0,
            MARGIN - 6.0,
            y + 4.0
        );
    }
}

/// Grouped bars of mean spectral efficiency per regime, annotated with the gain.
pub fn spatial_svg(res: &SpatialResult) -> String {
    let mut s = header("Mean spectral efficiency by interference regime", "bits/s/Hz");
    let hi = res
        .summaries
        .iter()
        .map(|r| r.se_memory.max(r.se_interface))
        .fold(0.0, f64::max)
        * 1.1;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let to_y = |v: f64| HEIGHT - MARGIN - plot_h * v / hi.max(f64::MIN_POSITIVE);
    y_ticks(&mut s, 0.0, hi, to_y);
    let group_w = (WIDTH - 1.5 * MARGIN) / res.summaries.len().max(1) as f64;
    let bar_w = group_w * 0.3;
    for (i, r) in res.summaries.iter().enumerate() {
        let x0 = MARGIN + group_w * i as f64 + group_w * 0.2;
        for (j, (v, color)) in [(r.se_interface, INTERFACE_COLOR), (r.se_memory, MEMORY_COLOR)].iter().enumerate() {
            let x = x0 + bar_w * j as f64;
            let y = to_y(*v);
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{bar_w:.2}" height="{:.2}" fill="{color}"/>"#,
                HEIGHT - MARGIN - y
            );
        }
        let cx = x0 + bar_w;
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN + 18.0,
            r.regime.label()
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">+{:.1}%</text>"#,
            to_y(r.se_memory.max(r.se_interface)) - 6.0,
            r.gain_pct_mean
        );
    }
    legend(&mut s);
    s.push_str("</svg>\n");
    s
}

/// Early-window cumulative throughput per event for both agents.
pub fn temporal_svg(res: &TemporalResult) -> String {
    let mut s = header("Early-window cumulative throughput per event", "cumulative throughput");
    let interface = res.series(AgentProfile::Interface);
    let memory = res.series(AgentProfile::Memory);
    let all: Vec<f64> = interface.iter().chain(&memory).copied().collect();
    let (mut lo, mut hi) = (
        all.iter().copied().fold(f64::INFINITY, f64::min),
        all.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = (hi - lo) * 0.1;
    let (lo, hi) = (lo - pad, hi + pad);
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let plot_w = WIDTH - 1.5 * MARGIN - 20.0;
    let n = interface.len().max(2);
    let to_x = |i: usize| MARGIN + 10.0 + plot_w * i as f64 / (n - 1) as f64;
    let to_y = |v: f64| HEIGHT - MARGIN - plot_h * (v - lo) / (hi - lo);
    y_ticks(&mut s, lo, hi, to_y);
    for i in 0..interface.len() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            to_x(i),
            HEIGHT - MARGIN + 18.0,
            i + 1
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">event</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    for (series, color) in [(&interface, INTERFACE_COLOR), (&memory, MEMORY_COLOR)] {
        let points: Vec<String> = series
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", to_x(i), to_y(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        );
        for (i, &v) in series.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"><title>{}</title></circle>"#,
                to_x(i),
                to_y(v),
                fmt6(v)
            );
        }
    }
    legend(&mut s);
    s.push_str("</svg>\n");
    s
}
