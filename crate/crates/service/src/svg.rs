//! Network graphs as standalone SVG.
//!
//! Edge width grows linearly with |weight| up to `MAX_STROKE` for the
//! heaviest edge, with `MIN_STROKE` as a floor for any non-zero edge.
//! Algorithm networks are red, human networks blue; difference networks
//! use red where the algorithm is stronger and blue where the human is.

use std::fmt::Write;

use forumcode_core::ena::{NetworkGraph, NetworkKind, NodePosition};
use serde_json::json;

use crate::run::META_PREFIX;

pub const ALGORITHM_COLOR: &str = "#d62728";
pub const HUMAN_COLOR: &str = "#1f77b4";
pub const MIN_STROKE: f64 = 1.0;
pub const MAX_STROKE: f64 = 14.0;
const SIZE: f64 = 520.0;
const MARGIN: f64 = 80.0;

#[derive(Debug, Clone, Copy)]
pub enum Coloring<'a> {
    Solid(&'a str),
    /// Colors for positive and negative weights.
    Signed(&'a str, &'a str),
}

pub struct SvgMeta<'a> {
    pub config_hash: &'a str,
    pub accumulation: &'a str,
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Canvas coordinates for each node. Falls back to a circle when the
/// projected positions coincide.
fn layout(nodes: &[NodePosition]) -> Vec<(f64, f64)> {
    let extent = nodes.iter().flat_map(|n| [n.x.abs(), n.y.abs()]).fold(0.0, f64::max);
    let half = SIZE / 2.0;
    if extent < 1e-9 {
        let n = nodes.len().max(1) as f64;
        return (0..nodes.len())
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n - std::f64::consts::FRAC_PI_2;
                (half + (half - MARGIN) * a.cos(), half + (half - MARGIN) * a.sin())
            })
            .collect();
    }
    let scale = (half - MARGIN) / extent;
    nodes.iter().map(|n| (half + n.x * scale, half - n.y * scale)).collect()
}

pub fn stroke_width(weight: f64, max_abs: f64) -> f64 {
    if weight == 0.0 || max_abs <= 0.0 {
        return 0.0;
    }
    (MAX_STROKE * weight.abs() / max_abs).max(MIN_STROKE)
}

pub fn render_network(graph: &NetworkGraph, coloring: Coloring<'_>, meta: &SvgMeta<'_>) -> String {
    let pos = layout(&graph.nodes);
    let index = |code: &str| graph.nodes.iter().position(|n| n.code == code);
    let max_abs = graph.edges.iter().map(|e| e.weight.abs()).fold(0.0, f64::max);
    let kind = match graph.kind {
        NetworkKind::Unit => "unit",
        NetworkKind::GroupMean => "group_mean",
        NetworkKind::Difference => "difference",
    };
    let meta_json = json!({
        "tool": format!("forumcode {}", env!("CARGO_PKG_VERSION")),
        "config": meta.config_hash,
        "network": kind,
        "label": graph.label,
        "accumulation": meta.accumulation,
    });

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, "{META_PREFIX}{meta_json} -->");
    let _ = writeln!(s, "<title>{}</title>", escape(&graph.label));
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<g class="edges">"#);
    for e in &graph.edges {
        let (Some(i), Some(j)) = (index(&e.a), index(&e.b)) else { continue };
        let width = stroke_width(e.weight, max_abs);
        if width == 0.0 {
            continue;
        }
        let color = match coloring {
            Coloring::Solid(c) => c,
            Coloring::Signed(pos_c, neg_c) => {
                if e.weight > 0.0 {
                    pos_c
                } else {
                    neg_c
                }
            }
        };
        let ((x1, y1), (x2, y2)) = (pos[i], pos[j]);
        let _ = writeln!(
            s,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{color}" stroke-width="{width:.2}" stroke-linecap="round" opacity="0.75" data-a="{}" data-b="{}" data-weight="{:.4}"/>"#,
            escape(&e.a),
            escape(&e.b),
            e.weight
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle" fill="#333">{:.2}</text>"##,
            (x1 + x2) / 2.0,
            (y1 + y2) / 2.0 - 4.0,
            e.weight
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g class="nodes">"#);
    for (n, (x, y)) in graph.nodes.iter().zip(&pos) {
        let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="7" fill="#222"/>"##);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
            y - 12.0,
            escape(&n.code)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}
