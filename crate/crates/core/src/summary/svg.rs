use std::fmt::Write;

use super::{Subject, SubjectKind, Summary};

pub const PX_PER_SECOND: f64 = 20.0;
pub const LANE_HEIGHT: f64 = 24.0;

const LEFT: f64 = 96.0;
const TOP: f64 = 8.0;
const LEGEND_ROW: f64 = 16.0;
const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn lane_name(s: &Subject) -> String {
    match s.kind {
        SubjectKind::Person => format!("person {}", s.id),
        SubjectKind::Shot => format!("shot {}", s.id),
    }
}

/// SVG 1.1 timeline: one lane per subject, one rectangle per event and a
/// colour legend of every label. Output depends only on the summary.
pub fn render_svg(summary: &Summary) -> String {
    let seconds = summary.extent() as f64 / summary.fps;
    let lanes_bottom = TOP + summary.subjects.len() as f64 * LANE_HEIGHT;
    let width = LEFT + (seconds * PX_PER_SECOND).max(240.0) + 16.0;
    let height = lanes_bottom + 12.0 + summary.labels.len() as f64 * LEGEND_ROW + 8.0;
    let colour = |action: &str| {
        let i = summary.labels.iter().position(|l| l == action).unwrap_or(0);
        PALETTE[i % PALETTE.len()]
    };

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.2}" height="{height:.2}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(&summary.video));
    for (i, s) in summary.subjects.iter().enumerate() {
        let y = TOP + i as f64 * LANE_HEIGHT;
        let _ = writeln!(out, r#"<text x="4" y="{:.2}">{}</text>"#, y + 15.0, escape(&lane_name(s)));
        for e in &s.events {
            let x = LEFT + e.start as f64 / summary.fps * PX_PER_SECOND;
            let w = (e.end - e.start) as f64 / summary.fps * PX_PER_SECOND;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{:.2}" width="{w:.2}" height="{:.2}" fill="{}"><title>{} {}-{} ({:.3})</title></rect>"#,
                y + 2.0,
                LANE_HEIGHT - 4.0,
                colour(&e.action),
                escape(&e.action),
                e.start,
                e.end,
                e.confidence
            );
        }
    }
    for (i, l) in summary.labels.iter().enumerate() {
        let y = lanes_bottom + 12.0 + i as f64 * LEGEND_ROW;
        let _ = writeln!(
            out,
            r#"<rect x="4" y="{y:.2}" width="12" height="12" fill="{}"/><text x="22" y="{:.2}">{}</text>"#,
            PALETTE[i % PALETTE.len()],
            y + 10.0,
            escape(l)
        );
    }
    out.push_str("</svg>\n");
    out
}
