//! Acceptance checks. Each criterion prints one PASS/FAIL line; the test
//! fails if any criterion does.
//!
//! Every reference value is computed here by an independent route
//! (direct formulas, brute-force enumeration, normal equations) rather
//! than through the library code under test.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use forumcode_core::agreement::{kappa, ConfusionCounts};
use forumcode_core::autocoder::{code_posts, Code, CodeScheme, Keyword, Provenance};
use forumcode_core::corpus::{merge_tables, read_coded_csv, Corpus, Post, Source, UnitKey};
use forumcode_core::ena::{
    accumulate, difference_network, project_means_rotation, register_nodes, registration_matrix, Accumulation,
    EnaSpace, PairOrder,
};
use forumcode_core::preprocess::{build_vocabulary, Normalizer, PreprocessConfig, TokenStream};
use forumcode_core::rng::Rng;
use forumcode_core::stats::{mann_whitney, Alternative, Method};
use forumcode_core::topics::{fit_with_observer, select_k, summarize, LdaParams};
use forumcode_service::config::{RunConfig, TopicsConfig};
use forumcode_service::pipeline;
use forumcode_service::run::RunDir;

type Check = Result<(), String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Check {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

// ---------------------------------------------------------------- kappa

/// κ from two explicit label vectors, counted pairwise.
fn kappa_oracle(x: &[bool], y: &[bool]) -> f64 {
    let n = x.len() as f64;
    let agree = x.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / n;
    let px = x.iter().filter(|&&v| v).count() as f64 / n;
    let py = y.iter().filter(|&&v| v).count() as f64 / n;
    let chance = px * py + (1.0 - px) * (1.0 - py);
    if (1.0 - chance).abs() < 1e-15 {
        return if agree == 1.0 { 1.0 } else { 0.0 };
    }
    (agree - chance) / (1.0 - chance)
}

fn kappa_criterion() -> Check {
    let start = Instant::now();
    let mut tables = 0;
    for n in 1..=12u64 {
        for a in 0..=n {
            for b in 0..=n - a {
                for c in 0..=n - a - b {
                    let d = n - a - b - c;
                    let counts = ConfusionCounts { a, b, c, d };
                    let mut x = Vec::new();
                    let mut y = Vec::new();
                    for (count, fx, fy) in [(a, true, true), (b, true, false), (c, false, true), (d, false, false)] {
                        for _ in 0..count {
                            x.push(fx);
                            y.push(fy);
                        }
                    }
                    let got = kappa(&counts);
                    let want = kappa_oracle(&x, &y);
                    ensure((got - want).abs() <= 1e-12, || format!("{counts:?}: {got} vs oracle {want}"))?;
                    let same = kappa(&ConfusionCounts::tally(x.iter().copied(), x.iter().copied()));
                    ensure(same == 1.0, || format!("κ(identical) = {same} for {x:?}"))?;
                    tables += 1;
                }
            }
        }
    }
    println!("    {tables} tables checked");
    within(start.elapsed(), Duration::from_secs(5))
}

// ---------------------------------------------------------- Mann-Whitney

/// Every way of picking which of 1..=n_a+n_b belong to group A.
fn subsets(total: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize == size {
            out.push((0..total).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect());
        }
    }
    out
}

fn u_by_counting(a: &[f64], b: &[f64]) -> f64 {
    a.iter().map(|x| b.iter().filter(|y| x > y).count() as f64).sum()
}

fn mann_whitney_criterion() -> Check {
    let start = Instant::now();
    let mut cases = 0;
    for n_a in 1..=6 {
        for n_b in 1..=6 {
            let total = n_a + n_b;
            let splits = subsets(total, n_a);
            let groups: Vec<(Vec<f64>, Vec<f64>)> = splits
                .iter()
                .map(|s| {
                    let a: Vec<f64> = s.iter().map(|&v| v as f64).collect();
                    let b: Vec<f64> = (1..=total).filter(|v| !s.contains(v)).map(|v| v as f64).collect();
                    (a, b)
                })
                .collect();
            let null: Vec<f64> = groups.iter().map(|(a, b)| u_by_counting(a, b)).collect();
            let m = null.len() as f64;
            for (a, b) in &groups {
                let res = mann_whitney(a, b, Alternative::TwoSided).map_err(|e| e.to_string())?;
                let rev = mann_whitney(b, a, Alternative::TwoSided).map_err(|e| e.to_string())?;
                let u = u_by_counting(a, b);
                let lower = null.iter().filter(|&&v| v <= u).count() as f64 / m;
                let upper = null.iter().filter(|&&v| v >= u).count() as f64 / m;
                let p = (2.0 * lower.min(upper)).min(1.0);
                ensure(res.method == Method::Exact, || format!("{a:?} vs {b:?} not exact"))?;
                ensure(res.u == u, || format!("{a:?} vs {b:?}: U {} vs {u}", res.u))?;
                ensure((res.p - p).abs() < 1e-12, || format!("{a:?} vs {b:?}: p {} vs {p}", res.p))?;
                ensure(res.u + rev.u == (n_a * n_b) as f64, || format!("U_A+U_B ≠ N_A·N_B for {a:?} vs {b:?}"))?;
                for (alt, want) in [(Alternative::Less, lower), (Alternative::Greater, upper)] {
                    let one = mann_whitney(a, b, alt).map_err(|e| e.to_string())?;
                    ensure((one.p - want).abs() < 1e-12, || format!("{alt:?} p for {a:?} vs {b:?}"))?;
                }
                cases += 1;
            }
        }
    }
    let r = mann_whitney(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::TwoSided).map_err(|e| e.to_string())?;
    ensure(r.u == 0.0 && (r.p - 0.1).abs() < 1e-12 && r.r == 1.0, || {
        format!("[1,2,3] vs [4,5,6]: U={}, p={}, r={}", r.u, r.p, r.r)
    })?;
    println!("    {cases} splits checked");
    within(start.elapsed(), Duration::from_secs(10))
}

// -------------------------------------------------------------- topics

fn planted_corpus(seed: u64) -> (Vec<TokenStream>, Vec<HashSet<String>>) {
    let (topics, words, docs, len) = (5, 20, 100, 50);
    let vocab: Vec<Vec<String>> = (0..topics).map(|t| (0..words).map(|w| format!("t{t}w{w:02}")).collect()).collect();
    let noise: Vec<String> = (0..20).map(|w| format!("noise{w:02}")).collect();
    let mut rng = Rng::new(seed);
    let streams = (0..topics * docs)
        .map(|d| TokenStream {
            post_ref: d as u64 + 1,
            tokens: (0..len)
                .map(|_| {
                    if rng.uniform() < 0.1 {
                        noise[rng.below(noise.len())].clone()
                    } else {
                        vocab[d % topics][rng.below(words)].clone()
                    }
                })
                .collect(),
        })
        .collect();
    (streams, vocab.into_iter().map(|v| v.into_iter().collect()).collect())
}

fn planted_topics_criterion() -> Check {
    let start = Instant::now();
    let (streams, planted) = planted_corpus(2024);
    let vocab = build_vocabulary(&streams, 1, 1.0).map_err(|e| e.to_string())?;
    let params = LdaParams { iterations: 300, seed: 42, ..LdaParams::new(2) };
    let ks: Vec<usize> = (2..=8).collect();
    let (report, model) = select_k(&streams, &vocab, &ks, &params, 10).map_err(|e| e.to_string())?;
    ensure(report.selected_k.abs_diff(5) <= 1, || format!("selected K={}", report.selected_k))?;
    let summaries = summarize(&model, &vocab, 10);
    let matched = planted
        .iter()
        .filter(|p| summaries.iter().any(|s| s.top_words.iter().filter(|w| p.contains(&w.term)).count() >= 8))
        .count();
    println!("    K={} selected, {matched}/5 planted topics recovered", report.selected_k);
    ensure(matched >= 4, || format!("only {matched} planted topics recovered"))?;
    within(start.elapsed(), Duration::from_secs(60))
}

/// Tokens and vocabulary of the sample corpus, through the real stages.
fn sample_tokens(dir: &Path) -> Result<(Vec<TokenStream>, forumcode_core::preprocess::Vocabulary), String> {
    let run = RunDir::create(dir.join("tokens")).map_err(|e| e.to_string())?;
    let cfg = RunConfig::load(&common::sample_dir().join("run.json")).map_err(|e| e.to_string())?;
    pipeline::ingest(&run, &cfg.corpus, &cfg.columns, cfg.unit_key).map_err(|e| e.to_string())?;
    pipeline::preprocess(&run, &cfg.preprocess).map_err(|e| e.to_string())?;
    Ok((
        pipeline::load_streams(&run).map_err(|e| e.to_string())?,
        pipeline::load_vocab(&run).map_err(|e| e.to_string())?,
    ))
}

fn lda_invariants_criterion(dir: &Path) -> Check {
    let (streams, vocab) = sample_tokens(dir)?;
    let params = LdaParams { iterations: 200, seed: 42, ..LdaParams::new(4) };
    let mut failures = Vec::new();
    let mut sweeps = 0;
    let model = fit_with_observer(&streams, &vocab, &params, |sweep, m| {
        sweeps += 1;
        for (d, doc) in m.docs().iter().enumerate() {
            let total: u32 = (0..params.k).map(|k| m.n_dk(d, k)).sum();
            if total as usize != doc.len() {
                failures.push(format!("sweep {sweep}: Σ_k n_dk = {total} for doc {d} of length {}", doc.len()));
            }
        }
        for k in 0..params.k {
            let total: u32 = (0..m.vocab_size()).map(|w| m.n_kw(k, w)).sum();
            if total != m.n_k(k) {
                failures.push(format!("sweep {sweep}: Σ_w n_kw = {total} ≠ n_k = {} for topic {k}", m.n_k(k)));
            }
        }
    })
    .map_err(|e| e.to_string())?;
    ensure(failures.is_empty(), || failures[..failures.len().min(3)].join("; "))?;
    ensure(sweeps == params.iterations, || format!("observer saw {sweeps} sweeps"))?;
    let again = fit_with_observer(&streams, &vocab, &params, |_, _| {}).map_err(|e| e.to_string())?;
    ensure(model.assignments() == again.assignments(), || "same seed gave different assignments".into())?;
    let other =
        fit_with_observer(&streams, &vocab, &LdaParams { seed: 43, ..params }, |_, _| {}).map_err(|e| e.to_string())?;
    ensure(model.assignments() != other.assignments(), || "seed has no effect".into())?;
    println!("    {sweeps} sweeps over {} documents", streams.len());
    Ok(())
}

// -------------------------------------------------------------- coding

const WORDS: [&str; 16] = [
    "effort",
    "struggle",
    "sleep",
    "exercise",
    "reread",
    "highlight",
    "familiar",
    "recall",
    "flashcards",
    "mix",
    "problems",
    "practice",
    "hard",
    "work",
    "the",
    "of",
];

fn random_phrase(rng: &mut Rng) -> String {
    let len = 1 + rng.below(2);
    (0..len).map(|_| WORDS[rng.below(WORDS.len())]).collect::<Vec<_>>().join(" ")
}

fn coding_criterion(dir: &Path) -> Check {
    let mut rng = Rng::new(7);
    let ts = forumcode_core::corpus::parse_timestamp("2024-01-01 00:00").expect("timestamp");
    for case in 0..200 {
        let posts: Vec<Post> = (0..12)
            .map(|i| Post {
                entry_id: i,
                user_id: format!("u{}", i % 3),
                timestamp: ts,
                text: (0..3 + rng.below(10)).map(|_| WORDS[rng.below(WORDS.len())]).collect::<Vec<_>>().join(" "),
                semester: None,
            })
            .collect();
        let corpus = Corpus::new(posts, UnitKey::User);
        let cfg = PreprocessConfig::default();
        let normalizer = Normalizer::new(&cfg, &corpus).map_err(|e| e.to_string())?;
        let streams = normalizer.normalize_corpus(&corpus);
        let mut scheme = CodeScheme {
            codes: (0..3)
                .map(|c| Code {
                    name: format!("c{c}"),
                    definition: String::new(),
                    keywords: (0..1 + rng.below(3))
                        .map(|_| Keyword { text: random_phrase(&mut rng), provenance: Provenance::Lda })
                        .collect(),
                })
                .collect(),
            topic_map: BTreeMap::new(),
        };
        let before = code_posts(&corpus, &streams, &scheme, &normalizer);
        let target = rng.below(3);
        let added = random_phrase(&mut rng);
        scheme.codes[target].keywords.push(Keyword { text: added.clone(), provenance: Provenance::Instructor });
        let after = code_posts(&corpus, &streams, &scheme, &normalizer);
        for (x, y) in before.rows.iter().zip(&after.rows) {
            for code in &before.codes {
                ensure(!x.flag(code) || y.flag(code), || {
                    format!("case {case}: adding `{added}` cleared {code} on post {}", x.entry_id)
                })?;
            }
        }
    }

    // on the sample run, the full coding contains the LDA-only coding
    let run = common::sample_run(&dir.join("coding"));
    let read = |name: &str| {
        let bytes = std::fs::read(run.path(name)).map_err(|e| e.to_string())?;
        read_coded_csv(bytes.as_slice(), Source::Algorithm).map_err(|e| e.to_string())
    };
    let (codes, full) = read(pipeline::CODED)?;
    let (_, lda) = read(pipeline::CODED_LDA)?;
    let mut extra = 0;
    for (f, l) in full.iter().zip(&lda) {
        for c in &codes {
            ensure(!l.flag(c) || f.flag(c), || format!("post {}: {c} set by LDA keywords only", l.entry_id))?;
            extra += usize::from(f.flag(c) && !l.flag(c));
        }
    }
    println!("    200 random schemes; sample coding adds {extra} flags over LDA-only");
    Ok(())
}

// ----------------------------------------------------------------- ENA

fn sample_space(run: &RunDir) -> Result<(EnaSpace, Vec<Vec<f64>>, PairOrder), String> {
    let read = |name: &str, source| {
        let bytes = std::fs::read(run.path(name)).map_err(|e| e.to_string())?;
        read_coded_csv(bytes.as_slice(), source).map_err(|e| e.to_string())
    };
    let (codes, alg) = read(pipeline::CODED, Source::Algorithm)?;
    let (_, human) = read(pipeline::REFERENCE, Source::Human)?;
    let rows = merge_tables(&alg, &human).map_err(|e| e.to_string())?;
    let order = PairOrder::new(&codes).map_err(|e| e.to_string())?;
    let vectors = accumulate(&rows, &order, UnitKey::User, Accumulation::Count).map_err(|e| e.to_string())?;
    let space =
        project_means_rotation(&vectors, &order, Accumulation::Count, UnitKey::User).map_err(|e| e.to_string())?;
    let raw = vectors.iter().map(|v| v.weights.clone()).collect();
    Ok((space, raw, order))
}

/// Solves (AᵀA) x = Aᵀb by Gaussian elimination with partial pivoting.
fn normal_equations(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a[0].len();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| a.iter().map(|r| r[i] * r[j]).sum()).collect();
            row.push(a.iter().zip(b).map(|(r, y)| r[i] * y).sum());
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        let pivot_row = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot_row[col];
                for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * p;
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

fn ena_criterion(dir: &Path) -> Check {
    let run = common::sample_run(&dir.join("ena"));
    let (space, raw, order) = sample_space(&run)?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    for (u, w) in space.units.iter().zip(&raw) {
        if w.iter().any(|&x| x != 0.0) {
            let norm = dot(&u.normalized, &u.normalized).sqrt();
            ensure((norm - 1.0).abs() <= 1e-12, || format!("unit {} has norm {norm}", u.id))?;
        }
    }
    for (i, x) in space.axes.iter().enumerate() {
        for (j, y) in space.axes.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            ensure((dot(x, y) - want).abs() <= 1e-9, || format!("axes {i},{j}: dot {}", dot(x, y)))?;
        }
    }
    for axis in 1..space.axes.len() {
        let mean = |s| {
            let p = space.group_points(s, axis);
            p.iter().sum::<f64>() / p.len() as f64
        };
        let (h, a) = (mean(Source::Human), mean(Source::Algorithm));
        ensure((h - a).abs() <= 1e-9, || format!("{}: group means {h} vs {a}", space.axis_labels[axis]))?;
    }

    let alg = space.group_network(Source::Algorithm).map_err(|e| e.to_string())?;
    let hum = space.group_network(Source::Human).map_err(|e| e.to_string())?;
    let ab = difference_network(&alg, &hum);
    let ba = difference_network(&hum, &alg);
    for (x, y) in ab.edges.iter().zip(&ba.edges) {
        ensure(x.a == y.a && x.b == y.b && x.weight == -y.weight, || format!("{}-{} not antisymmetric", x.a, x.b))?;
    }

    // node registration against the normal equations on the 4-code space
    let included: Vec<&forumcode_core::ena::EnaUnit> = space.units.iter().filter(|u| !u.zero).collect();
    let normalized: Vec<Vec<f64>> = included.iter().map(|u| u.normalized.clone()).collect();
    let points: Vec<Vec<f64>> = included.iter().map(|u| u.point.clone().expect("projected")).collect();
    let reg = register_nodes(&normalized, &points, &order);
    let a = registration_matrix(&normalized, &order);
    let rows: Vec<Vec<f64>> = (0..a.nrows()).map(|r| (0..a.ncols()).map(|c| a[(r, c)]).collect()).collect();
    ensure(reg.rank == order.codes.len(), || format!("registration rank {}", reg.rank))?;
    for d in 0..points[0].len() {
        let b: Vec<f64> = points.iter().map(|p| p[d]).collect();
        let x = normal_equations(&rows, &b).ok_or("singular normal equations")?;
        let resid: f64 = rows.iter().zip(&b).map(|(r, y)| (dot(r, &x) - y).powi(2)).sum();
        ensure((resid - reg.residual[d]).abs() <= 1e-8, || {
            format!("axis {d}: residual {} vs oracle {resid}", reg.residual[d])
        })?;
    }
    println!("    {} units, {} axes, {} codes", space.units.len(), space.axes.len(), order.codes.len());
    Ok(())
}

// ---------------------------------------------------------- end to end

fn strengths_rows(html: &str) -> Result<Vec<(String, f64)>, String> {
    let start = html.find("<table class=\"strengths\">").ok_or("no strengths table")?;
    let table = &html[start..start + html[start..].find("</table>").ok_or("unterminated table")?];
    let mut rows = Vec::new();
    for line in table.lines().skip(1) {
        let cells: Vec<&str> =
            line.trim_start_matches("<tr><td>").trim_end_matches("</td></tr>").split("</td><td>").collect();
        if cells.len() != 3 || !cells[0].contains(" and ") {
            return Err(format!("bad strengths row `{line}`"));
        }
        rows.push((cells[0].to_string(), cells[1].parse::<f64>().map_err(|e| e.to_string())?));
    }
    Ok(rows)
}

/// `AXIS: human (Mdn=x, N=n) vs algorithm (Mdn=x, N=n, U=x, p=x, r=x)`
fn stat_line_ok(line: &str, axis: &str) -> bool {
    let Some(rest) = line.strip_prefix(&format!("{axis}: human (Mdn=")) else { return false };
    let Some((_, rest)) = rest.split_once(", N=") else { return false };
    let Some((_, rest)) = rest.split_once(") vs algorithm (Mdn=") else { return false };
    let keys = [", N=", ", U=", ", p=", ", r="];
    let mut rest = rest;
    for k in keys {
        let Some((value, tail)) = rest.split_once(k) else { return false };
        if value.parse::<f64>().is_err() {
            return false;
        }
        rest = tail;
    }
    rest.strip_suffix(')')
        .is_some_and(|r| r.parse::<f64>().is_ok() && r.split_once('.').is_some_and(|(_, d)| d.len() == 2))
}

fn golden_criterion(dir: &Path) -> Check {
    let first = common::sample_run(&dir.join("golden-a"));
    let second = common::sample_run(&dir.join("golden-b"));
    let ma = first.manifest().map_err(|e| e.to_string())?;
    let mb = second.manifest().map_err(|e| e.to_string())?;
    ensure(ma.artifacts.len() >= 30, || format!("only {} artifacts", ma.artifacts.len()))?;
    for (name, hash) in &ma.artifacts {
        ensure(mb.artifacts.get(name) == Some(hash), || format!("{name} differs between runs"))?;
        if name.ends_with(".csv") || name.ends_with(".json") {
            let a = std::fs::read(first.path(name)).map_err(|e| e.to_string())?;
            let b = std::fs::read(second.path(name)).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("{name} bytes differ"))?;
        }
    }
    let manifest_a = std::fs::read(first.path("manifest.json")).map_err(|e| e.to_string())?;
    let manifest_b = std::fs::read(second.path("manifest.json")).map_err(|e| e.to_string())?;
    ensure(manifest_a == manifest_b, || "manifest.json differs".into())?;
    for name in ["coded.csv", "kappa.csv", "kappa_lda_only.csv", "strengths.csv"] {
        let got = std::fs::read(first.path(name)).map_err(|e| e.to_string())?;
        let want = std::fs::read(common::golden_dir().join(name)).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("{name} does not match the checked-in golden copy"))?;
    }

    let html = std::fs::read_to_string(first.path(pipeline::REPORT)).map_err(|e| e.to_string())?;
    let rows = strengths_rows(&html)?;
    ensure(rows.len() == 6, || format!("{} strength rows", rows.len()))?;
    let codes: HashSet<&str> = rows.iter().flat_map(|(pair, _)| pair.split(" and ")).collect();
    ensure(codes.len() == 4, || format!("{} codes in strengths table", codes.len()))?;
    ensure(rows.windows(2).all(|w| w[0].1 >= w[1].1), || "strengths not strongest-first".into())?;
    ensure(html.contains("<th>Strength (A+HK)</th><th>Strength (H)</th>"), || "strength headers".into())?;
    for axis in ["MR1", "SVD2"] {
        let line = html
            .lines()
            .filter_map(|l| l.strip_prefix("<p class=\"mw\">").and_then(|l| l.strip_suffix("</p>")))
            .find(|l| l.starts_with(axis))
            .ok_or(format!("no {axis} line"))?;
        ensure(stat_line_ok(line, axis), || format!("badly formatted line `{line}`"))?;
    }
    println!("    {} artifacts identical across runs", ma.artifacts.len());
    Ok(())
}

// --------------------------------------------------------------- scale

const THEMES: [(&str, &[&str]); 4] = [
    ("effort", &["effort", "struggle", "persist", "difficult", "grind", "challenge", "patience", "hours"]),
    ("beyondLS", &["sleep", "exercise", "stress", "mindset", "diet", "rest", "health", "breaks"]),
    ("illusions", &["reread", "highlight", "familiar", "illusion", "fluent", "confident", "copying", "skim"]),
    ("retrieval", &["recall", "flashcards", "quiz", "interleave", "retrieval", "testing", "mixing", "spacing"]),
];
const FILLER: [&str; 12] = [
    "course", "week", "video", "lecture", "module", "notes", "think", "really", "today", "students", "helpful", "idea",
];

fn write_scale_inputs(dir: &Path, posts: usize) -> Result<RunConfig, String> {
    let mut rng = Rng::new(2648);
    let mut corpus = csv::Writer::from_path(dir.join("posts.csv")).map_err(|e| e.to_string())?;
    let mut human = csv::Writer::from_path(dir.join("human.csv")).map_err(|e| e.to_string())?;
    corpus.write_record(["entry_id", "user_id", "timestamp", "text"]).map_err(|e| e.to_string())?;
    let mut header = vec!["entry_id", "user_id", "timestamp", "text"];
    header.extend(THEMES.iter().map(|(c, _)| *c));
    header.push("source");
    human.write_record(&header).map_err(|e| e.to_string())?;
    // students stick to two or three themes each
    let users = 50;
    let interests: Vec<Vec<usize>> = (0..users)
        .map(|u| {
            let mut themes: Vec<usize> = (0..4).collect();
            themes.remove(u % 4);
            if u % 3 == 0 {
                themes.remove(u % 3);
            }
            themes
        })
        .collect();
    for i in 0..posts {
        let u = i % users;
        let user = format!("u{u:03}");
        let ts = format!("2023-{:02}-{:02} {:02}:{:02}:00", 1 + i / 240 % 12, 1 + i % 28, i % 24, i % 60);
        let mut present = [false; 4];
        let mut words = Vec::new();
        for _ in 0..1 + rng.below(2) {
            let t = interests[u][rng.below(interests[u].len())];
            present[t] = true;
            for _ in 0..4 + rng.below(5) {
                words.push(THEMES[t].1[rng.below(8)]);
            }
        }
        for _ in 0..5 + rng.below(10) {
            words.push(FILLER[rng.below(FILLER.len())]);
        }
        let text = words.join(" ");
        let id = (10_000 + i).to_string();
        corpus.write_record([id.as_str(), &user, &ts, &text]).map_err(|e| e.to_string())?;
        let mut rec = vec![id, user, ts, text];
        // the rater occasionally misses a code
        rec.extend(present.iter().map(|&p| if p && rng.uniform() >= 0.05 { "1" } else { "0" }.to_string()));
        rec.push("human".into());
        human.write_record(&rec).map_err(|e| e.to_string())?;
    }
    corpus.flush().map_err(|e| e.to_string())?;
    human.flush().map_err(|e| e.to_string())?;
    let scheme = serde_json::json!({
        "codes": THEMES.iter().map(|(name, words)| serde_json::json!({
            "name": name,
            "keywords": words[..3].iter().map(|w| serde_json::json!({"text": w, "provenance": "instructor"})).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "topic_map": {"0": "effort", "1": "retrieval"},
    });
    std::fs::write(dir.join("scheme.json"), scheme.to_string()).map_err(|e| e.to_string())?;
    let mut cfg = common::sample_config(&dir.join("runs"));
    cfg.corpus = dir.join("posts.csv");
    cfg.scheme = dir.join("scheme.json");
    cfg.reference = Some(dir.join("human.csv"));
    cfg.topics = TopicsConfig::default();
    Ok(cfg)
}

fn scale_criterion(dir: &Path) -> Check {
    let inputs = dir.join("scale");
    std::fs::create_dir_all(&inputs).map_err(|e| e.to_string())?;
    let cfg = write_scale_inputs(&inputs, 2648)?;
    let start = Instant::now();
    let run = pipeline::run_all(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(run.has(pipeline::REPORT), || "no report".into())?;
    let topics = pipeline::load_topics(&run).map_err(|e| e.to_string())?;
    println!("    2648 posts, K range 2..8 (K={} chosen), {elapsed:.1?}", topics.selected_k);
    within(elapsed, Duration::from_secs(300))
}

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let criteria: Vec<Criterion> = vec![
        ("kappa matches direct-formula oracle on all tables n<=12", Box::new(kappa_criterion)),
        ("Mann-Whitney exact p matches full enumeration", Box::new(mann_whitney_criterion)),
        ("planted topics recovered by coherence-selected K", Box::new(planted_topics_criterion)),
        ("LDA count invariants every sweep; seed determinism", Box::new(|| lda_invariants_criterion(d))),
        ("coding is monotone in keywords; A+HK covers LDA-only", Box::new(|| coding_criterion(d))),
        ("ENA algebra: norms, orthonormal axes, means, antisymmetry, registration", Box::new(|| ena_criterion(d))),
        ("end-to-end sample run is byte-identical and reported", Box::new(|| golden_criterion(d))),
        ("2,648-post corpus through the full pipeline under 5 minutes", Box::new(|| scale_criterion(d))),
    ];
    let mut failed = Vec::new();
    for (name, check) in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("PASS  {name} ({secs:.2}s)"),
            Err(e) => {
                println!("FAIL  {name} ({secs:.2}s): {e}");
                failed.push(*name);
            }
        }
        std::io::stdout().flush().ok();
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
