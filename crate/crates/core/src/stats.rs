//! Mann-Whitney U with medians and rank-biserial effect size.
//!
//! U is reported for group A: the number of (a, b) pairs with a > b, ties
//! counting one half. The effect size is `r = 1 − 2U / (n_A·n_B)`, so r is
//! positive when group A sits lower than group B. Small tie-free samples
//! (n_A + n_B ≤ 20) get an exact p-value from the permutation distribution
//! of U; everything else uses the normal approximation with tie and
//! continuity corrections.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("group `{0}` is empty")]
    EmptyGroup(String),
    #[error("group `{0}` contains a non-finite value")]
    NonFinite(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// Largest combined sample size that gets an exact p-value.
pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// Group A tends to be smaller than group B.
    Less,
    /// Group A tends to be larger than group B.
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MannWhitneyResult {
    pub axis: String,
    pub label_a: String,
    pub label_b: String,
    pub median_a: f64,
    pub median_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub u: f64,
    pub p: f64,
    pub r: f64,
    pub method: Method,
    pub alternative: Alternative,
    /// Every value in both groups was identical.
    pub degenerate: bool,
}

impl MannWhitneyResult {
    /// `Mdn=…, N=…` for A, then `Mdn=…, N=…, U=…, p=…, r=…` for B.
    pub fn summary_line(&self) -> String {
        format!(
            "{}: {} (Mdn={}, N={}) vs {} (Mdn={}, N={}, U={}, p={}, r={})",
            self.axis,
            self.label_a,
            two_dp(self.median_a),
            self.n_a,
            self.label_b,
            two_dp(self.median_b),
            self.n_b,
            format_u(self.u),
            two_dp(self.p),
            two_dp(self.r),
        )
    }
}

impl fmt::Display for MannWhitneyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.summary_line())
    }
}

/// U is a whole or half number; print it that way.
fn format_u(u: f64) -> String {
    if u.fract() == 0.0 {
        format!("{u:.0}")
    } else {
        format!("{u:.1}")
    }
}

/// Two decimals without a negative zero.
pub fn two_dp(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Midranks (1-based) of `values`, plus the sizes of tied groups.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

/// Number of arrangements of `m` A's and `n` B's giving each U = 0..=m·n.
pub fn u_distribution(m: usize, n: usize) -> Vec<f64> {
    // f[i][j] is the distribution for i A's and j B's; build row by row
    // using f(i, j, u) = f(i−1, j, u−j) + f(i, j−1, u).
    let max = m * n;
    let mut prev: Vec<Vec<f64>> = (0..=n).map(|_| vec![1.0]).collect();
    for i in 1..=m {
        let mut cur: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        cur.push(vec![1.0]);
        for j in 1..=n {
            let mut dist = vec![0.0; i * j + 1];
            for (u, &c) in prev[j].iter().enumerate() {
                dist[u + j] += c;
            }
            for (u, &c) in cur[j - 1].iter().enumerate() {
                dist[u] += c;
            }
            cur.push(dist);
        }
        prev = cur;
    }
    let out = prev.swap_remove(n);
    debug_assert_eq!(out.len(), max + 1);
    out
}

fn exact_p(u: f64, m: usize, n: usize, alternative: Alternative) -> f64 {
    let dist = u_distribution(m, n);
    let total: f64 = dist.iter().sum();
    let u = u.round() as usize;
    let lower: f64 = dist[..=u].iter().sum::<f64>() / total;
    let upper: f64 = dist[u..].iter().sum::<f64>() / total;
    match alternative {
        Alternative::TwoSided => (2.0 * lower.min(upper)).min(1.0),
        Alternative::Less => lower,
        Alternative::Greater => upper,
    }
}

fn normal_p(u: f64, m: usize, n: usize, ties: &[usize], alternative: Alternative) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    let total = mf + nf;
    let mean = mf * nf / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum::<f64>() / (total * (total - 1.0));
    let var = mf * nf / 12.0 * ((total + 1.0) - tie_term);
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p = match alternative {
        Alternative::TwoSided => {
            let z = ((u - mean).abs() - 0.5).max(0.0) / sd;
            (2.0 * std_normal.sf(z)).min(1.0)
        }
        Alternative::Greater => std_normal.sf((u - mean - 0.5) / sd),
        Alternative::Less => std_normal.cdf((u - mean + 0.5) / sd),
    };
    p.max(f64::MIN_POSITIVE)
}

/// Compares group A (`xs`) with group B (`ys`).
pub fn mann_whitney(xs: &[f64], ys: &[f64], alternative: Alternative) -> Result<MannWhitneyResult> {
    for (label, g) in [("A", xs), ("B", ys)] {
        if g.is_empty() {
            return Err(StatsError::EmptyGroup(label.into()));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(label.into()));
        }
    }
    let (m, n) = (xs.len(), ys.len());
    let all: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let (ranks, ties) = midranks(&all);
    let rank_sum_a: f64 = ranks[..m].iter().sum();
    let u = rank_sum_a - (m * (m + 1)) as f64 / 2.0;
    let mn = (m * n) as f64;
    let r = 1.0 - 2.0 * u / mn;
    let degenerate = all.iter().all(|&v| v == all[0]);
    let (p, method) = if degenerate {
        (1.0, Method::NormalApprox)
    } else if ties.is_empty() && m + n <= EXACT_MAX_N {
        (exact_p(u, m, n, alternative), Method::Exact)
    } else {
        (normal_p(u, m, n, &ties, alternative), Method::NormalApprox)
    };
    Ok(MannWhitneyResult {
        axis: String::new(),
        label_a: "A".into(),
        label_b: "B".into(),
        median_a: median(xs),
        median_b: median(ys),
        n_a: m,
        n_b: n,
        u,
        p,
        r: if degenerate { 0.0 } else { r },
        method,
        alternative,
        degenerate,
    })
}

/// Runs the test on one axis and attaches labels.
pub fn compare_axis(
    axis: &str,
    (label_a, xs): (&str, &[f64]),
    (label_b, ys): (&str, &[f64]),
    alternative: Alternative,
) -> Result<MannWhitneyResult> {
    let mut res = mann_whitney(xs, ys, alternative)?;
    res.axis = axis.into();
    res.label_a = label_a.into();
    res.label_b = label_b.into();
    Ok(res)
}

/// `axis,group_a,group_b,median_a,median_b,n_a,n_b,u,p,r,method,degenerate`
pub fn write_results_csv<W: Write>(writer: W, results: &[MannWhitneyResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "axis",
        "group_a",
        "group_b",
        "median_a",
        "median_b",
        "n_a",
        "n_b",
        "u",
        "p",
        "r",
        "method",
        "degenerate",
    ])?;
    for r in results {
        w.write_record([
            r.axis.clone(),
            r.label_a.clone(),
            r.label_b.clone(),
            format!("{:.6}", r.median_a),
            format!("{:.6}", r.median_b),
            r.n_a.to_string(),
            r.n_b.to_string(),
            format!("{:.2}", r.u),
            format!("{:.6}", r.p),
            format!("{:.6}", r.r),
            match r.method {
                Method::Exact => "exact".into(),
                Method::NormalApprox => "normal_approx".into(),
            },
            r.degenerate.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
