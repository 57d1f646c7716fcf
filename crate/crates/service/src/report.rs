//! Single-file HTML summary of a run.
//!
//! Sections follow the usual order of such write-ups: topics, interrater
//! reliability, group networks with their strength table, the difference
//! network, and the Mann-Whitney lines.

use std::fmt::Write;

use forumcode_core::agreement::KappaReport;
use forumcode_core::autocoder::CodingProvenance;
use forumcode_core::ena::{strength_table, Accumulation, EnaSpace};
use forumcode_core::stats::two_dp;
use serde_json::json;

use crate::error::Result;
use crate::pipeline::{self as p, KappaArtifact};
use crate::run::{sha256_hex, RunDir, META_PREFIX};
use crate::svg::{escape, render_network, Coloring, SvgMeta, ALGORITHM_COLOR, HUMAN_COLOR};

const STYLE: &str = "body{font-family:sans-serif;max-width:1100px;margin:2em auto;color:#222}\
table{border-collapse:collapse;margin:1em 0}td,th{border:1px solid #bbb;padding:4px 10px;text-align:left}\
th{background:#f2f2f2}.nets{display:flex;flex-wrap:wrap;gap:1em}.nets figure{margin:0}\
.meta{color:#555}.mw{font-family:monospace}";

/// Hash of the stage settings that shape the report.
fn config_hash(run: &RunDir) -> String {
    let mut bytes = Vec::new();
    for name in [p::PREPROCESS, p::SCHEME_INPUT, p::AGREEMENT_CONFIG, p::ENA_CONFIG, p::STATS_CONFIG] {
        if let Ok(b) = std::fs::read(run.path(name)) {
            bytes.extend(name.as_bytes());
            bytes.extend(b);
        }
    }
    sha256_hex(&bytes)[..16].to_string()
}

fn accumulation_text(a: Accumulation) -> &'static str {
    match a {
        Accumulation::Binary => "binary (a pair counts once if both codes occur anywhere in the unit's posts)",
        Accumulation::Count => "count (co-occurrences summed over the unit's posts in time order)",
    }
}

fn kappa_table(out: &mut String, title: &str, report: &KappaReport) {
    let _ = writeln!(out, "<h3>{}</h3>", escape(title));
    let _ = writeln!(
        out,
        "<table><tr><th>Code</th><th>a</th><th>b</th><th>c</th><th>d</th><th>Cohen's κ</th><th>Level</th></tr>"
    );
    for c in &report.per_code {
        let _ = writeln!(
            out,
            "<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
            escape(&c.code),
            c.counts.a,
            c.counts.b,
            c.counts.c,
            c.counts.d,
            two_dp(c.kappa),
            c.band
        );
    }
    let _ = writeln!(out, "</table>");
}

fn coding_label(k: &KappaArtifact) -> &'static str {
    match k.provenance {
        CodingProvenance::LdaOnly => "Automated",
        CodingProvenance::LdaPlusInstructor => "Automated + Human Keywords (A+HK)",
    }
}

fn excluded_note(space: &EnaSpace) -> String {
    let excluded = space.excluded_units();
    if excluded.is_empty() {
        return String::new();
    }
    let names: Vec<String> = excluded.iter().map(|u| format!("{} ({})", escape(&u.id), u.source)).collect();
    format!("<p class=\"meta\">Units without any connection, left out of the projection: {}.</p>\n", names.join(", "))
}

/// Writes the SVGs and `report.html`; returns the file names written.
pub fn write_report(run: &RunDir) -> Result<Vec<String>> {
    let topics = p::load_topics(run)?;
    let scheme = p::load_scheme(run)?;
    let kappa = p::load_kappa(run, p::KAPPA)?;
    let kappa_lda = p::load_kappa(run, p::KAPPA_LDA)?;
    let space = p::load_space(run)?;
    let networks = p::load_networks(run)?;
    let stats = p::load_stats(run)?;
    let run_id = run.manifest()?.run_id.unwrap_or_else(|| "-".into());
    let hash = config_hash(run);
    let accumulation = match space.accumulation {
        Accumulation::Binary => "binary",
        Accumulation::Count => "count",
    };
    let meta = SvgMeta { config_hash: &hash, accumulation };

    let svg_alg = render_network(&networks.algorithm, Coloring::Solid(ALGORITHM_COLOR), &meta);
    let svg_hum = render_network(&networks.human, Coloring::Solid(HUMAN_COLOR), &meta);
    let svg_diff = render_network(&networks.difference, Coloring::Signed(ALGORITHM_COLOR, HUMAN_COLOR), &meta);
    run.write_bytes(p::SVG_ALGORITHM, svg_alg.as_bytes())?;
    run.write_bytes(p::SVG_HUMAN, svg_hum.as_bytes())?;
    run.write_bytes(p::SVG_DIFFERENCE, svg_diff.as_bytes())?;

    let label = coding_label(&kappa);
    let short = if kappa.provenance == CodingProvenance::LdaPlusInstructor { "A+HK" } else { "A" };
    let mut h = String::new();
    let _ = writeln!(h, "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">");
    let _ = writeln!(
        h,
        "{META_PREFIX}{} -->",
        json!({"tool": format!("forumcode {}", env!("CARGO_PKG_VERSION")), "config": hash})
    );
    let _ = writeln!(h, "<title>Discussion coding report</title>\n<style>{STYLE}</style>\n</head>\n<body>");
    let _ = writeln!(h, "<h1>Discussion coding report</h1>");
    let _ = writeln!(
        h,
        "<p class=\"meta\">Run {}. Accumulation: {}. Units: {}. K={}, seed {}, {} sweeps.</p>",
        escape(&run_id),
        accumulation_text(space.accumulation),
        match space.unit_key {
            forumcode_core::corpus::UnitKey::User => "students",
            forumcode_core::corpus::UnitKey::UserSemester => "students per semester",
        },
        topics.selected_k,
        topics.seed,
        topics.iterations
    );

    // Topics
    let _ = writeln!(h, "<h2>Topics</h2>\n<table><tr><th>Topic</th><th>Code</th><th>Top words</th></tr>");
    for t in &topics.topics {
        let code = scheme.topic_map.get(&t.topic_id).map_or("—".to_string(), |c| escape(c));
        let words: Vec<String> = t.top_words.iter().map(|w| escape(&w.term)).collect();
        let _ = writeln!(h, "<tr><td>{}</td><td>{}</td><td>{}</td></tr>", t.topic_id, code, words.join(", "));
    }
    let _ = writeln!(h, "</table>");
    let _ = writeln!(h, "<table><tr><th>K</th><th>UMass coherence</th></tr>");
    for (k, c) in &topics.coherence {
        let mark = if *k == topics.selected_k { " (selected)" } else { "" };
        let _ = writeln!(h, "<tr><td>{k}{mark}</td><td>{c:.3}</td></tr>");
    }
    let _ = writeln!(h, "</table>");

    // Interrater reliability
    let _ = writeln!(h, "<h2>Interrater reliability</h2>");
    kappa_table(&mut h, "Automated coding vs human coding", &kappa_lda.report);
    if kappa.provenance == CodingProvenance::LdaPlusInstructor {
        kappa_table(&mut h, &format!("{label} vs human coding"), &kappa.report);
    }

    // Networks
    let _ = writeln!(h, "<h2>Group networks</h2>\n<div class=\"nets\">");
    let _ = writeln!(h, "<figure>\n{svg_alg}<figcaption>{} (red)</figcaption></figure>", escape(label));
    let _ = writeln!(h, "<figure>\n{svg_hum}<figcaption>Human (blue)</figcaption></figure>\n</div>");
    let _ = writeln!(
        h,
        "<table class=\"strengths\"><tr><th>Connection</th><th>Strength ({short})</th><th>Strength (H)</th></tr>"
    );
    for row in strength_table(&networks.algorithm, &networks.human) {
        let _ = writeln!(
            h,
            "<tr><td>{} and {}</td><td>{}</td><td>{}</td></tr>",
            escape(&row.a),
            escape(&row.b),
            two_dp(row.first),
            two_dp(row.second)
        );
    }
    let _ = writeln!(h, "</table>");
    h.push_str(&excluded_note(&space));

    let _ = writeln!(h, "<h2>Difference network</h2>");
    let _ = writeln!(
        h,
        "<figure>\n{svg_diff}<figcaption>{} minus human: red edges are stronger in the {} network, blue edges in the human one.</figcaption></figure>",
        escape(label),
        short
    );

    // Statistics
    let _ = writeln!(h, "<h2>Mann-Whitney tests</h2>");
    for r in &stats.results {
        let _ = writeln!(h, "<p class=\"mw\">{}</p>", escape(&r.summary_line()));
    }
    let variance: Vec<String> =
        space.axis_labels.iter().zip(&space.variance).take(2).map(|(l, v)| format!("{l} {:.1}%", v * 100.0)).collect();
    let _ = writeln!(h, "<p class=\"meta\">Variance explained: {}.</p>", variance.join(", "));
    let _ = writeln!(h, "</body>\n</html>");
    run.write_bytes(p::REPORT, h.as_bytes())?;

    Ok([p::SVG_ALGORITHM, p::SVG_HUMAN, p::SVG_DIFFERENCE, p::REPORT].map(String::from).to_vec())
}
